#include "corml/dataio.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <istream>
#include <random>
#include <sstream>
#include <unordered_set>

#include "corml/error.hpp"

namespace corml {

Index IdIndex::add_user(const std::string& token) {
  const auto [it, inserted] = user_lookup_.try_emplace(token, static_cast<Index>(users_.size()));
  if (inserted) users_.push_back(token);
  return it->second;
}

Index IdIndex::add_item(const std::string& token) {
  const auto [it, inserted] = item_lookup_.try_emplace(token, static_cast<Index>(items_.size()));
  if (inserted) items_.push_back(token);
  return it->second;
}

std::optional<Index> IdIndex::find_user(const std::string& token) const {
  const auto it = user_lookup_.find(token);
  if (it == user_lookup_.end()) return std::nullopt;
  return it->second;
}

std::optional<Index> IdIndex::find_item(const std::string& token) const {
  const auto it = item_lookup_.find(token);
  if (it == item_lookup_.end()) return std::nullopt;
  return it->second;
}

namespace {

struct PairHash {
  std::size_t operator()(const TokenPair& p) const {
    const std::size_t a = std::hash<std::string>{}(p.first);
    const std::size_t b = std::hash<std::string>{}(p.second);
    return a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2));
  }
};

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::istringstream ss(line);
  std::string f;
  while (ss >> f) fields.push_back(f);
  return fields;
}

}  // namespace

ParsedInteractions parse_interactions(std::istream& in) {
  ParsedInteractions out;
  std::unordered_set<TokenPair, PairHash> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    auto fields = split_fields(line);
    if (fields.size() != 2) {
      out.diagnostics.push_back(
          {line_no, "expected 2 fields, found " + std::to_string(fields.size())});
      continue;
    }
    TokenPair p{std::move(fields[0]), std::move(fields[1])};
    if (seen.insert(p).second) out.pairs.push_back(std::move(p));
  }
  if (out.pairs.empty()) throw DataError("no interactions in input");
  return out;
}

void SplitOptions::validate() const {
  if (!(train_ratio > 0.0 && valid_ratio > 0.0 && test_ratio > 0.0)) {
    throw UsageError("split ratios must be positive");
  }
  if (std::abs(train_ratio + valid_ratio + test_ratio - 1.0) > 1e-9) {
    throw UsageError("split ratios must sum to 1");
  }
}

SplitDataset split(const std::vector<TokenPair>& pairs, const SplitOptions& opts) {
  opts.validate();

  // Degrees on the deduplicated input decide which users survive.
  std::unordered_map<std::string, std::size_t> degree;
  std::unordered_set<TokenPair, PairHash> unique;
  std::vector<const TokenPair*> ordered;
  for (const auto& p : pairs) {
    if (unique.insert(p).second) {
      ++degree[p.first];
      ordered.push_back(&p);
    }
  }

  SplitDataset out;
  std::vector<std::vector<Index>> per_user;
  std::vector<std::pair<Index, Index>> kept;
  std::unordered_set<std::string> dropped;
  for (const TokenPair* p : ordered) {
    if (degree[p->first] < opts.min_user_degree) {
      dropped.insert(p->first);
      continue;
    }
    const Index u = out.index.add_user(p->first);
    const Index i = out.index.add_item(p->second);
    if (u == per_user.size()) per_user.emplace_back();
    per_user[u].push_back(i);
    kept.emplace_back(u, i);
  }
  out.dropped_users = dropped.size();
  if (out.index.n_users() == 0) {
    throw DataError("every user has fewer than " + std::to_string(opts.min_user_degree) +
                    " interactions");
  }

  std::mt19937_64 gen(opts.seed);
  std::vector<std::pair<Index, Index>> train, valid, test;

  if (opts.mode == SplitMode::per_user) {
    for (Index u = 0; u < per_user.size(); ++u) {
      auto& items = per_user[u];
      std::shuffle(items.begin(), items.end(), gen);
      const std::size_t n = items.size();
      const std::size_t n_train = std::max<std::size_t>(
          1, static_cast<std::size_t>(std::floor(opts.train_ratio * static_cast<double>(n))));
      const std::size_t n_test = std::min(
          n - n_train, static_cast<std::size_t>(std::floor(opts.test_ratio * static_cast<double>(n))));
      const std::size_t n_valid = n - n_train - n_test;
      for (std::size_t k = 0; k < n; ++k) {
        auto& target = k < n_train ? train : (k < n_train + n_valid ? valid : test);
        target.emplace_back(u, items[k]);
      }
    }
  } else {
    std::shuffle(kept.begin(), kept.end(), gen);
    const std::size_t n = kept.size();
    const auto n_train = static_cast<std::size_t>(std::floor(opts.train_ratio * static_cast<double>(n)));
    const auto n_valid = static_cast<std::size_t>(std::floor(opts.valid_ratio * static_cast<double>(n)));
    std::vector<char> has_train(out.index.n_users(), 0);
    for (std::size_t k = 0; k < n; ++k) {
      if (k < n_train) has_train[kept[k].first] = 1;
    }
    for (std::size_t k = 0; k < n; ++k) {
      const Index u = kept[k].first;
      if (k < n_train) {
        train.push_back(kept[k]);
      } else if (!has_train[u]) {
        // Every user keeps at least one training interaction.
        has_train[u] = 1;
        train.push_back(kept[k]);
      } else if (k < n_train + n_valid) {
        valid.push_back(kept[k]);
      } else {
        test.push_back(kept[k]);
      }
    }
  }

  const Index nu = out.index.n_users();
  const Index ni = out.index.n_items();
  out.train = InteractionMatrix::from_pairs(nu, ni, std::move(train));
  out.valid = InteractionMatrix::from_pairs(nu, ni, std::move(valid));
  out.test = InteractionMatrix::from_pairs(nu, ni, std::move(test));
  return out;
}

namespace {

void write_pairs(const InteractionMatrix& m, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write " + path.string());
  for (Index u = 0; u < m.n_users(); ++u) {
    for (Index i : m.row(u)) f << u << '\t' << i << '\n';
  }
}

std::vector<std::pair<Index, Index>> read_pairs(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot read " + path.string());
  std::vector<std::pair<Index, Index>> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ss(line);
    long long u = -1, i = -1;
    if (!(ss >> u >> i) || u < 0 || i < 0) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": malformed index pair");
    }
    out.emplace_back(static_cast<Index>(u), static_cast<Index>(i));
  }
  return out;
}

template <class Add>
void read_tokens(const std::filesystem::path& path, Add add) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot read " + path.string());
  std::string line;
  Index expected = 0;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    const auto tab = line.rfind('\t');
    if (tab == std::string::npos) throw DataError(path.string() + ": missing TAB");
    const std::string token = line.substr(0, tab);
    const auto index = std::stoull(line.substr(tab + 1));
    if (index != expected || add(token) != expected) {
      throw DataError(path.string() + ": indices must be contiguous and unique");
    }
    ++expected;
  }
}

}  // namespace

void write_split(const SplitDataset& data, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_pairs(data.train, dir / "train.tsv");
  write_pairs(data.valid, dir / "valid.tsv");
  write_pairs(data.test, dir / "test.tsv");
  std::ofstream users(dir / "users.tsv", std::ios::binary);
  for (Index u = 0; u < data.index.n_users(); ++u) users << data.index.user_token(u) << '\t' << u << '\n';
  std::ofstream items(dir / "items.tsv", std::ios::binary);
  for (Index i = 0; i < data.index.n_items(); ++i) items << data.index.item_token(i) << '\t' << i << '\n';
  if (!users || !items) throw DataError("cannot write split index files in " + dir.string());
}

SplitDataset read_split(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw DataError("split directory not found: " + dir.string());
  SplitDataset data;
  read_tokens(dir / "users.tsv", [&](const std::string& t) { return data.index.add_user(t); });
  read_tokens(dir / "items.tsv", [&](const std::string& t) { return data.index.add_item(t); });
  const Index nu = data.index.n_users();
  const Index ni = data.index.n_items();
  data.train = InteractionMatrix::from_pairs(nu, ni, read_pairs(dir / "train.tsv"));
  data.valid = InteractionMatrix::from_pairs(nu, ni, read_pairs(dir / "valid.tsv"));
  data.test = InteractionMatrix::from_pairs(nu, ni, read_pairs(dir / "test.tsv"));
  return data;
}

std::uint64_t fnv1a(const std::uint8_t* data, std::size_t size, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (std::size_t k = 0; k < size; ++k) {
    h ^= data[k];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t hash_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot read " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return fnv1a(bytes.data(), bytes.size());
}

namespace {

constexpr char kMagic[6] = {'C', 'O', 'R', 'M', 'L', '\x01'};

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  template <class T>
  void uint(T v) {
    for (std::size_t k = 0; k < sizeof(T); ++k) out_.push_back(static_cast<std::uint8_t>(v >> (8 * k)));
  }
  void f64(double v) { uint(std::bit_cast<std::uint64_t>(v)); }
  std::vector<std::uint8_t>& data() { return out_; }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  Reader(const std::vector<std::uint8_t>& b, std::size_t end) : b_(b), end_(end) {}

  void need(std::size_t n) const {
    if (pos_ + n > end_) {
      throw ModelFileError(ModelFileError::Reason::truncated, "model file is truncated");
    }
  }
  template <class T>
  T uint() {
    need(sizeof(T));
    T v = 0;
    for (std::size_t k = 0; k < sizeof(T); ++k) v |= static_cast<T>(static_cast<T>(b_[pos_ + k]) << (8 * k));
    pos_ += sizeof(T);
    return v;
  }
  double f64() { return std::bit_cast<double>(uint<std::uint64_t>()); }
  std::size_t pos() const { return pos_; }

 private:
  const std::vector<std::uint8_t>& b_;
  std::size_t end_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_model(const Model& m) {
  const Index n_items = m.n_items();
  const Index rank = m.filter.rank();
  if (m.filter.v.rows() != 0 && m.filter.v.rows() != n_items) {
    throw DimensionError("encode_model: filter factor has the wrong item count");
  }
  if (m.weights.n() != 0 && m.weights.n() != n_items) {
    throw DimensionError("encode_model: weight matrix has the wrong size");
  }
  Writer w;
  w.bytes(kMagic, sizeof(kMagic));
  w.uint<std::uint16_t>(kModelFileVersion);
  w.uint<std::uint8_t>(static_cast<std::uint8_t>(m.kind));
  w.uint<std::uint8_t>(static_cast<std::uint8_t>(m.filter_policy));
  w.uint<std::uint8_t>(static_cast<std::uint8_t>(m.hp.weights));
  w.uint<std::uint32_t>(m.n_users());
  w.uint<std::uint32_t>(n_items);
  w.uint<std::uint32_t>(rank);
  w.uint<std::uint64_t>(m.weights.nnz());
  w.uint<std::uint64_t>(m.nnz_budget);
  for (double v : {m.hp.t, m.hp.t_u, m.hp.epsilon, m.hp.theta, m.hp.lambda, m.hp.rho, m.hp.tol}) {
    w.f64(v);
  }
  w.uint<std::uint32_t>(m.hp.max_iters);
  w.uint<std::uint32_t>(m.hp.power_iters);
  w.uint<std::uint64_t>(m.hp.seed);
  w.uint<std::uint8_t>(m.filter.rank_deficient ? 1 : 0);

  const auto rows = m.weights.entry_rows();
  const auto cols = m.weights.cols();
  const auto vals = m.weights.values();
  for (std::size_t k = 0; k < vals.size(); ++k) {
    w.uint<std::uint32_t>(rows[k]);
    w.uint<std::uint32_t>(cols[k]);
    w.f64(vals[k]);
  }
  for (Index k = 0; k < rank; ++k) w.f64(m.filter.singular_values[k]);
  for (Index i = 0; i < m.filter.v.rows(); ++i) {
    for (Index k = 0; k < rank; ++k) w.f64(m.filter.v(i, k));
  }
  for (Index i = 0; i < n_items; ++i) w.uint<std::uint32_t>(static_cast<std::uint32_t>(m.item_degrees[i]));
  for (Index u = 0; u < m.n_users(); ++u) w.uint<std::uint32_t>(static_cast<std::uint32_t>(m.user_degrees[u]));
  const std::uint64_t checksum = fnv1a(w.data().data(), w.data().size());
  w.uint<std::uint64_t>(checksum);
  return std::move(w.data());
}

Model decode_model(const std::vector<std::uint8_t>& bytes) {
  using Reason = ModelFileError::Reason;
  if (bytes.size() < sizeof(kMagic) + 2 ||
      !std::equal(std::begin(kMagic), std::end(kMagic), bytes.begin())) {
    if (bytes.size() < sizeof(kMagic)) throw ModelFileError(Reason::truncated, "model file is truncated");
    throw ModelFileError(Reason::version_mismatch, "not a model file of a supported version (bad magic tag)");
  }
  if (bytes.size() < 8) throw ModelFileError(Reason::truncated, "model file is truncated");
  // The body excludes the trailing checksum.
  Reader r(bytes, bytes.size() >= 8 ? bytes.size() - 8 : 0);
  for (std::size_t k = 0; k < sizeof(kMagic); ++k) r.uint<std::uint8_t>();
  const auto version = r.uint<std::uint16_t>();
  if (version != kModelFileVersion) {
    throw ModelFileError(Reason::version_mismatch,
                         "model file version " + std::to_string(version) + " is not supported");
  }
  Model m;
  const auto kind = r.uint<std::uint8_t>();
  const auto policy = r.uint<std::uint8_t>();
  const auto weights_mode = r.uint<std::uint8_t>();
  if (kind > 2 || policy > 1 || weights_mode > 1) throw ModelFileError(Reason::malformed, "bad header enum");
  m.kind = static_cast<ModelKind>(kind);
  m.filter_policy = static_cast<FilterPolicy>(policy);
  m.hp.weights = static_cast<PenaltyWeights>(weights_mode);
  const auto n_users = r.uint<std::uint32_t>();
  const auto n_items = r.uint<std::uint32_t>();
  const auto rank = r.uint<std::uint32_t>();
  const auto nnz = r.uint<std::uint64_t>();
  m.nnz_budget = r.uint<std::uint64_t>();
  m.hp.t = r.f64();
  m.hp.t_u = r.f64();
  m.hp.epsilon = r.f64();
  m.hp.theta = r.f64();
  m.hp.lambda = r.f64();
  m.hp.rho = r.f64();
  m.hp.tol = r.f64();
  m.hp.max_iters = r.uint<std::uint32_t>();
  m.hp.power_iters = r.uint<std::uint32_t>();
  m.hp.seed = r.uint<std::uint64_t>();
  m.filter.rank_deficient = r.uint<std::uint8_t>() != 0;
  m.hp.rank = rank;

  // The header fixes the payload size; check it before allocating anything.
  const std::size_t has_v = rank > 0 ? 1 : 0;
  const unsigned __int128 expected =
      static_cast<unsigned __int128>(r.pos()) + static_cast<unsigned __int128>(nnz) * 16 +
      static_cast<unsigned __int128>(rank) * 8 +
      static_cast<unsigned __int128>(n_items) * rank * 8 * has_v +
      static_cast<unsigned __int128>(n_items) * 4 + static_cast<unsigned __int128>(n_users) * 4 + 8;
  if (expected > bytes.size()) throw ModelFileError(Reason::truncated, "model file is truncated");
  if (expected < bytes.size()) throw ModelFileError(Reason::malformed, "trailing bytes after model payload");

  const std::uint64_t stored = [&] {
    std::uint64_t v = 0;
    for (std::size_t k = 0; k < 8; ++k) v |= static_cast<std::uint64_t>(bytes[bytes.size() - 8 + k]) << (8 * k);
    return v;
  }();
  if (stored != fnv1a(bytes.data(), bytes.size() - 8)) {
    throw ModelFileError(Reason::checksum, "model file checksum mismatch");
  }

  std::vector<Index> rows(nnz), cols(nnz);
  std::vector<double> vals(nnz);
  for (std::uint64_t k = 0; k < nnz; ++k) {
    rows[k] = r.uint<std::uint32_t>();
    cols[k] = r.uint<std::uint32_t>();
    vals[k] = r.f64();
  }
  try {
    m.weights = nnz == 0 && m.kind == ModelKind::gfcf
                    ? SparseSquareMatrix()
                    : SparseSquareMatrix::from_sorted_triples(n_items, std::move(rows),
                                                              std::move(cols), std::move(vals));
  } catch (const DataError& e) {
    throw ModelFileError(Reason::malformed, std::string("weight block: ") + e.what());
  }
  m.filter.singular_values.resize(rank);
  for (Index k = 0; k < rank; ++k) m.filter.singular_values[k] = r.f64();
  m.filter.v.resize(rank > 0 ? n_items : 0, rank);
  for (Index i = 0; i < m.filter.v.rows(); ++i) {
    for (Index k = 0; k < rank; ++k) m.filter.v(i, k) = r.f64();
  }
  m.item_degrees.resize(n_items);
  for (Index i = 0; i < n_items; ++i) m.item_degrees[i] = r.uint<std::uint32_t>();
  m.user_degrees.resize(n_users);
  for (Index u = 0; u < n_users; ++u) m.user_degrees[u] = r.uint<std::uint32_t>();
  m.filter.item_degrees = m.item_degrees;
  return m;
}

void save_model(const Model& model, const std::filesystem::path& path) {
  const auto bytes = encode_model(model);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw ModelFileError(ModelFileError::Reason::io, "cannot write " + path.string());
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw ModelFileError(ModelFileError::Reason::io, "write failed for " + path.string());
}

Model load_model(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ModelFileError(ModelFileError::Reason::io, "cannot read model file " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return decode_model(bytes);
}

}  // namespace corml
