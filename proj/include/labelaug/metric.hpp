#pragma once

// Embedding-space utilities: cosine distance, the batch-all triplet loss and
// top-k cosine ranking against a one-shot gallery.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace labelaug {

/// Unit-norm embedding vector with a class label.
class Embedding {
 public:
  Embedding() = default;
  /// Normalises `values`; throws InvalidArgument for empty, zero or
  /// non-finite input.
  Embedding(std::int64_t class_id, std::vector<double> values);

  std::int64_t class_id() const { return class_id_; }
  const std::vector<double>& values() const { return values_; }
  size_t dimension() const { return values_.size(); }

 private:
  std::int64_t class_id_ = 0;
  std::vector<double> values_;
};

double cosine_similarity(const Embedding& u, const Embedding& v);
/// 1 - <u, v>, in [0, 2].
double cosine_distance(const Embedding& u, const Embedding& v);

/// P classes with exactly K embeddings each.
struct TripletBatch {
  std::vector<Embedding> embeddings;
  double margin = 0.3;
};

enum class TripletAggregation { Sum, MeanOverActive };

struct TripletLoss {
  double value = 0.0;
  size_t triplets = 0;
  size_t active = 0;  ///< triplets with a positive hinge
  int classes = 0;
  int per_class = 0;
};

/// Sum of max(0, m + D(a, p) - D(a, n)) over every anchor, positive of the
/// same class (p != a) and negative of another class.
TripletLoss batch_all_triplet_loss(const TripletBatch& batch,
                                   TripletAggregation aggregation = TripletAggregation::Sum);

struct RankEntry {
  std::int64_t class_id = 0;
  double similarity = 0.0;
};

/// Gallery entries ordered by decreasing cosine similarity, ties by
/// ascending class id; at most k entries.
std::vector<RankEntry> rank_top_k(const Embedding& query, const std::vector<Embedding>& gallery, size_t k = 5);

/// One record per line: class id followed by whitespace-separated
/// components. Blank lines and lines starting with '#' are skipped. Errors
/// name the offending line.
std::vector<Embedding> read_embeddings(std::istream& in, const std::string& source = "<stream>");
std::vector<Embedding> load_embeddings(const std::filesystem::path& path);

}  // namespace labelaug
