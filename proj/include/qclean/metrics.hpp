#pragma once

// Retrieval metrics over first-hit ranks, plus the Cochran sample size used
// to size manual inspection samples.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "qclean/error.hpp"

namespace qclean {

// 1-based rank of the first ground-truth hit; nullopt if not retrieved.
using Rank = std::optional<std::uint64_t>;

inline double mrr(std::span<const Rank> ranks) {
  if (ranks.empty()) throw Error(ErrorKind::invalid_argument, "mrr of an empty rank list");
  double sum = 0.0;
  for (const auto& r : ranks) {
    if (!r) continue;
    if (*r < 1) throw Error(ErrorKind::invalid_argument, "ranks are 1-based");
    sum += 1.0 / static_cast<double>(*r);
  }
  return sum / static_cast<double>(ranks.size());
}

inline std::size_t answered_at_k(std::span<const Rank> ranks, std::uint64_t k) {
  if (k < 1) throw Error(ErrorKind::invalid_argument, "k must be >= 1");
  std::size_t n = 0;
  for (const auto& r : ranks)
    if (r && *r <= k) ++n;
  return n;
}

/// ss0 = z^2 p (1 - p) / c^2, then the finite-population correction
/// ss0 / (1 + (ss0 - 1) / N). No population means an infinite one.
inline std::uint64_t sample_size(std::optional<std::uint64_t> population, double z = 1.96, double p = 0.5,
                                 double c = 0.05) {
  if (population && *population < 1) throw Error(ErrorKind::invalid_argument, "population must be >= 1");
  if (!(p > 0.0 && p < 1.0)) throw Error(ErrorKind::invalid_argument, "p must be in (0, 1)");
  if (!(c > 0.0)) throw Error(ErrorKind::invalid_argument, "margin of error c must be > 0");
  const double ss0 = z * z * p * (1.0 - p) / (c * c);
  double ss = ss0;
  if (population) ss = ss0 / (1.0 + (ss0 - 1.0) / static_cast<double>(*population));
  // Shave rounding noise so an exact integer is not pushed up by one.
  return static_cast<std::uint64_t>(std::ceil(ss - 1e-9));
}

struct RankEntry {
  std::string query_id;
  Rank rank;
};

/// Rank file: JSONL with "query_id" (string) and "rank" (positive integer or null).
inline std::vector<RankEntry> read_rank_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open " + path);
  std::vector<RankEntry> out;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path + ":" + std::to_string(line_no) + ": ";
    try {
      auto j = nlohmann::json::parse(line);
      RankEntry e;
      if (!j.contains("query_id")) throw Error(ErrorKind::io, where + "missing required field \"query_id\"");
      if (!j.contains("rank")) throw Error(ErrorKind::io, where + "missing required field \"rank\"");
      e.query_id = j.at("query_id").is_string() ? j.at("query_id").get<std::string>() : j.at("query_id").dump();
      const auto& r = j.at("rank");
      if (!r.is_null()) {
        if (!r.is_number_integer() || r.get<std::int64_t>() < 1)
          throw Error(ErrorKind::io, where + "rank must be a positive integer or null");
        e.rank = r.get<std::uint64_t>();
      }
      if (!seen.insert(e.query_id).second) throw Error(ErrorKind::io, where + "duplicate query_id");
      out.push_back(std::move(e));
    } catch (const nlohmann::json::exception& ex) {
      throw Error(ErrorKind::io, where + "malformed JSON: " + ex.what());
    }
  }
  return out;
}

}  // namespace qclean
