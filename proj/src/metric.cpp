#include "labelaug/metric.hpp"

#include "labelaug/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace labelaug {

Embedding::Embedding(std::int64_t class_id, std::vector<double> values)
    : class_id_(class_id), values_(std::move(values)) {
  if (values_.empty()) fail(ErrorCode::InvalidArgument, "embedding has no components");
  double sq = 0.0;
  for (double v : values_) {
    if (!std::isfinite(v)) fail(ErrorCode::InvalidArgument, "embedding component is not finite");
    sq += v * v;
  }
  if (!(sq > 0.0)) fail(ErrorCode::InvalidArgument, "embedding has zero norm");
  const double inv = 1.0 / std::sqrt(sq);
  for (double& v : values_) v *= inv;
}

double cosine_similarity(const Embedding& u, const Embedding& v) {
  if (u.dimension() != v.dimension()) {
    fail(ErrorCode::DimensionMismatch, "embedding dimensions differ: " + std::to_string(u.dimension()) + " vs " +
                                           std::to_string(v.dimension()));
  }
  double dot = 0.0;
  for (size_t i = 0; i < u.dimension(); ++i) dot += u.values()[i] * v.values()[i];
  return std::clamp(dot, -1.0, 1.0);
}

double cosine_distance(const Embedding& u, const Embedding& v) { return 1.0 - cosine_similarity(u, v); }

TripletLoss batch_all_triplet_loss(const TripletBatch& batch, TripletAggregation aggregation) {
  if (!(batch.margin >= 0.0)) fail(ErrorCode::InvalidArgument, "margin must be non-negative");
  std::map<std::int64_t, std::vector<size_t>> classes;
  for (size_t i = 0; i < batch.embeddings.size(); ++i) classes[batch.embeddings[i].class_id()].push_back(i);
  if (classes.size() < 2) fail(ErrorCode::InvalidArgument, "a triplet batch needs at least two classes");
  const size_t k = classes.begin()->second.size();
  if (k < 2) fail(ErrorCode::InvalidArgument, "a triplet batch needs at least two embeddings per class");
  for (const auto& [id, members] : classes) {
    if (members.size() != k) fail(ErrorCode::InvalidArgument, "every class must contribute the same number of embeddings");
  }

  const size_t n = batch.embeddings.size();
  std::vector<double> dist(n * n);
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = 0; j < n; ++j) dist[i * n + j] = cosine_distance(batch.embeddings[i], batch.embeddings[j]);
  }

  TripletLoss out;
  out.classes = static_cast<int>(classes.size());
  out.per_class = static_cast<int>(k);
  for (size_t a = 0; a < n; ++a) {
    const std::int64_t cls = batch.embeddings[a].class_id();
    for (size_t p : classes[cls]) {
      if (p == a) continue;
      const double dap = dist[a * n + p];
      for (size_t neg = 0; neg < n; ++neg) {
        if (batch.embeddings[neg].class_id() == cls) continue;
        const double hinge = batch.margin + dap - dist[a * n + neg];
        ++out.triplets;
        if (hinge > 0.0) {
          out.value += hinge;
          ++out.active;
        }
      }
    }
  }
  if (aggregation == TripletAggregation::MeanOverActive) out.value = out.active ? out.value / out.active : 0.0;
  return out;
}

std::vector<RankEntry> rank_top_k(const Embedding& query, const std::vector<Embedding>& gallery, size_t k) {
  if (gallery.empty()) fail(ErrorCode::EmptyGallery, "gallery is empty");
  if (k == 0) fail(ErrorCode::InvalidArgument, "k must be at least 1");
  std::vector<RankEntry> ranked;
  ranked.reserve(gallery.size());
  for (const Embedding& g : gallery) ranked.push_back({g.class_id(), cosine_similarity(query, g)});
  std::sort(ranked.begin(), ranked.end(), [](const RankEntry& x, const RankEntry& y) {
    if (x.similarity != y.similarity) return x.similarity > y.similarity;
    return x.class_id < y.class_id;
  });
  if (ranked.size() > k) ranked.resize(k);
  return ranked;
}

std::vector<Embedding> read_embeddings(std::istream& in, const std::string& source) {
  std::vector<Embedding> out;
  std::string line;
  size_t line_no = 0;
  size_t dimension = 0;
  const auto error = [&](const std::string& what) {
    fail(ErrorCode::ParseError, source + ":" + std::to_string(line_no) + ": " + what);
  };
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream fields(line);
    std::string token;
    if (!(fields >> token)) continue;
    std::int64_t id = 0;
    try {
      size_t used = 0;
      id = std::stoll(token, &used);
      if (used != token.size()) error("class id '" + token + "' is not an integer");
    } catch (const std::logic_error&) {
      error("class id '" + token + "' is not an integer");
    }
    std::vector<double> values;
    while (fields >> token) {
      try {
        size_t used = 0;
        const double v = std::stod(token, &used);
        if (used != token.size() || !std::isfinite(v)) error("bad component '" + token + "'");
        values.push_back(v);
      } catch (const std::logic_error&) {
        error("bad component '" + token + "'");
      }
    }
    if (values.empty()) error("no components");
    if (dimension == 0) dimension = values.size();
    if (values.size() != dimension) {
      error("expected " + std::to_string(dimension) + " components, found " + std::to_string(values.size()));
    }
    try {
      out.emplace_back(id, std::move(values));
    } catch (const Error& e) {
      error(e.what());
    }
  }
  return out;
}

std::vector<Embedding> load_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoError, "cannot open " + path.string());
  return read_embeddings(in, path.string());
}

}  // namespace labelaug
