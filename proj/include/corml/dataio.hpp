#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "corml/model.hpp"
#include "corml/sparse.hpp"

namespace corml {

/// Bijection between external tokens and contiguous indices, for users and
/// for items. Indices are assigned in order of first insertion.
class IdIndex {
 public:
  Index add_user(const std::string& token);
  Index add_item(const std::string& token);
  std::optional<Index> find_user(const std::string& token) const;
  std::optional<Index> find_item(const std::string& token) const;

  const std::string& user_token(Index u) const { return users_.at(u); }
  const std::string& item_token(Index i) const { return items_.at(i); }
  Index n_users() const { return static_cast<Index>(users_.size()); }
  Index n_items() const { return static_cast<Index>(items_.size()); }

  friend bool operator==(const IdIndex& a, const IdIndex& b) {
    return a.users_ == b.users_ && a.items_ == b.items_;
  }

 private:
  std::vector<std::string> users_;
  std::vector<std::string> items_;
  std::unordered_map<std::string, Index> user_lookup_;
  std::unordered_map<std::string, Index> item_lookup_;
};

using TokenPair = std::pair<std::string, std::string>;

struct ParseDiagnostic {
  std::size_t line;
  std::string message;
};

struct ParsedInteractions {
  std::vector<TokenPair> pairs;             // first occurrence order, deduplicated
  std::vector<ParseDiagnostic> diagnostics;  // skipped lines
};

/// Reads `<user><TAB or spaces><item>` lines. Blank lines and lines starting
/// with '#' are ignored; any other line without exactly two fields is skipped
/// and reported. Throws DataError when no pair survives.
ParsedInteractions parse_interactions(std::istream& in);

enum class SplitMode { per_user, global };

struct SplitOptions {
  double train_ratio = 0.6;
  double valid_ratio = 0.2;
  double test_ratio = 0.2;
  std::uint64_t seed = 0;
  std::size_t min_user_degree = 5;
  SplitMode mode = SplitMode::per_user;

  /// Throws UsageError unless all ratios are positive and sum to 1.
  void validate() const;
};

struct SplitDataset {
  InteractionMatrix train;
  InteractionMatrix valid;
  InteractionMatrix test;
  IdIndex index;
  std::size_t dropped_users = 0;
};

/// Filters users below `min_user_degree`, then assigns each user's shuffled
/// interactions to train/valid/test. Per user with n interactions:
/// train = max(1, floor(train_ratio n)), test = floor(test_ratio n),
/// valid = the rest. Throws DataError when every user is filtered out.
SplitDataset split(const std::vector<TokenPair>& pairs, const SplitOptions& opts);

/// Writes train.tsv, valid.tsv, test.tsv (index pairs) and users.tsv,
/// items.tsv (token TAB index) into `dir`, creating it if needed.
void write_split(const SplitDataset& data, const std::filesystem::path& dir);
SplitDataset read_split(const std::filesystem::path& dir);

/// Binary model file. Layout (little-endian):
///   "CORML\x01" | u16 version | u8 kind | u8 filter policy | u8 weights mode
///   | u32 n_users | u32 n_items | u32 rank | u64 nnz | u64 nnz budget
///   | f64 t, t_u, epsilon, theta, lambda, rho, tol | u32 max_iters
///   | u32 power_iters | u64 seed | u8 rank deficient
///   | nnz x (u32 row, u32 col, f64 value), row-major sorted
///   | rank x f64 singular values | n_items x rank f64 V, row-major
///   | n_items x u32 item degrees | n_users x u32 user degrees
///   | u64 FNV-1a checksum of every preceding byte
inline constexpr std::uint16_t kModelFileVersion = 1;

std::vector<std::uint8_t> encode_model(const Model& model);
Model decode_model(const std::vector<std::uint8_t>& bytes);
void save_model(const Model& model, const std::filesystem::path& path);
Model load_model(const std::filesystem::path& path);

/// FNV-1a 64-bit hash.
std::uint64_t fnv1a(const std::uint8_t* data, std::size_t size,
                    std::uint64_t seed = 0xcbf29ce484222325ULL);
std::uint64_t hash_file(const std::filesystem::path& path);

}  // namespace corml
