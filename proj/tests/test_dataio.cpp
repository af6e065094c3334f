#include <doctest.h>

#include <set>
#include <sstream>

#include "corml/dataio.hpp"
#include "corml/error.hpp"
#include "synthetic.hpp"
#include "test_util.hpp"

using namespace corml;

namespace {

std::vector<TokenPair> toy_pairs(Index users, Index per_user) {
  std::vector<TokenPair> pairs;
  for (Index u = 0; u < users; ++u) {
    for (Index k = 0; k < per_user + u % 4; ++k) {
      pairs.emplace_back("user" + std::to_string(u), "item" + std::to_string((u * 7 + k * 3) % 37));
    }
  }
  return pairs;
}

Model toy_model() {
  Model m;
  m.kind = ModelKind::corml;
  m.hp.t = -0.125;
  m.hp.lambda = 0.4;
  m.hp.seed = 99;
  m.filter_policy = FilterPolicy::sparse;
  m.nnz_budget = 17;
  m.item_degrees = Vector::LinSpaced(5, 1.0, 5.0);
  m.user_degrees = Vector::LinSpaced(3, 2.0, 4.0);
  m.weights = SparseSquareMatrix::from_dense(testing::random_hollow_symmetric(5, 0.6, 4, true));
  m.filter.v = DenseMatrix::Random(5, 2);
  m.filter.singular_values = Vector::LinSpaced(2, 1.0, 0.5);
  m.filter.item_degrees = m.item_degrees;
  m.hp.rank = 2;
  return m;
}

void check_same_model(const Model& a, const Model& b) {
  CHECK(a.kind == b.kind);
  CHECK(a.filter_policy == b.filter_policy);
  CHECK(a.nnz_budget == b.nnz_budget);
  CHECK(a.hp.t == b.hp.t);
  CHECK(a.hp.lambda == b.hp.lambda);
  CHECK(a.hp.seed == b.hp.seed);
  CHECK(a.hp.rank == b.hp.rank);
  CHECK(a.weights == b.weights);
  CHECK(a.filter.v == b.filter.v);
  CHECK(a.filter.singular_values == b.filter.singular_values);
  CHECK(a.item_degrees == b.item_degrees);
  CHECK(a.user_degrees == b.user_degrees);
}

}  // namespace

TEST_SUITE("dataio") {
  TEST_CASE("parser skips comments, blanks and malformed lines and deduplicates") {
    std::istringstream in("# header\nu1\ti1\n\nu1 i2\nbroken\nu2\ti1\textra\nu1\ti1\nu2   i3\n");
    const auto parsed = parse_interactions(in);
    CHECK(parsed.pairs == std::vector<TokenPair>{{"u1", "i1"}, {"u1", "i2"}, {"u2", "i3"}});
    REQUIRE(parsed.diagnostics.size() == 2);
    CHECK(parsed.diagnostics[0].line == 5);
    CHECK(parsed.diagnostics[1].line == 6);
    std::istringstream empty("# nothing\n\n");
    CHECK_THROWS_AS(parse_interactions(empty), DataError);
  }

  TEST_CASE("split options are validated") {
    SplitOptions o;
    o.train_ratio = 0.5;
    CHECK_THROWS_AS(o.validate(), UsageError);
    o.train_ratio = 0.6;
    o.test_ratio = 0.0;
    o.valid_ratio = 0.4;
    CHECK_THROWS_AS(o.validate(), UsageError);
    CHECK_NOTHROW(SplitOptions{}.validate());
  }

  TEST_CASE("per-user split follows the count rule and partitions each user") {
    const auto pairs = toy_pairs(40, 4);
    SplitOptions o;
    o.seed = 5;
    const auto data = split(pairs, o);
    CHECK(data.dropped_users == 10);  // users with 4 interactions fall below 5
    for (Index u = 0; u < data.train.n_users(); ++u) {
      const std::size_t n = data.train.row(u).size() + data.valid.row(u).size() + data.test.row(u).size();
      CHECK(data.train.row(u).size() == std::max<std::size_t>(1, static_cast<std::size_t>(0.6 * n)));
      CHECK(data.test.row(u).size() == static_cast<std::size_t>(0.2 * n));
      std::set<Index> all;
      for (auto* m : {&data.train, &data.valid, &data.test}) {
        for (Index i : m->row(u)) CHECK(all.insert(i).second);
      }
    }
    std::size_t total = 0;
    for (const auto& p : pairs) {
      const auto u = data.index.find_user(p.first);
      if (u) ++total;
    }
    CHECK(total == data.train.nnz() + data.valid.nnz() + data.test.nnz());
  }

  TEST_CASE("split is deterministic and seed dependent") {
    const auto pairs = toy_pairs(30, 6);
    SplitOptions o;
    o.seed = 11;
    const auto a = split(pairs, o);
    const auto b = split(pairs, o);
    CHECK(a.train == b.train);
    CHECK(a.test == b.test);
    CHECK(a.index == b.index);
    o.seed = 12;
    CHECK_FALSE(split(pairs, o).train == a.train);
  }

  TEST_CASE("global split keeps a training interaction for every user") {
    const auto pairs = toy_pairs(30, 6);
    SplitOptions o;
    o.mode = SplitMode::global;
    o.seed = 2;
    const auto data = split(pairs, o);
    for (Index u = 0; u < data.train.n_users(); ++u) CHECK(!data.train.row(u).empty());
    const double total = static_cast<double>(data.train.nnz() + data.valid.nnz() + data.test.nnz());
    CHECK(data.test.nnz() / total == doctest::Approx(0.2).epsilon(0.1));
  }

  TEST_CASE("filtering every user is a data error") {
    SplitOptions o;
    o.min_user_degree = 100;
    CHECK_THROWS_AS(split(toy_pairs(5, 5), o), DataError);
  }

  TEST_CASE("split directories round trip") {
    const auto dir = testing::scratch_dir("split_roundtrip");
    SplitOptions o;
    const auto data = split(toy_pairs(25, 6), o);
    write_split(data, dir);
    const auto back = read_split(dir);
    CHECK(back.train == data.train);
    CHECK(back.valid == data.valid);
    CHECK(back.test == data.test);
    CHECK(back.index == data.index);
    CHECK_THROWS_AS(read_split(dir / "missing"), DataError);
  }

  TEST_CASE("model files round trip exactly") {
    const Model m = toy_model();
    check_same_model(decode_model(encode_model(m)), m);
    const auto path = testing::scratch_dir("model_roundtrip") / "m.bin";
    save_model(m, path);
    check_same_model(load_model(path), m);
    CHECK(encode_model(load_model(path)) == encode_model(m));
  }

  TEST_CASE("gfcf and ease models round trip") {
    Model g = toy_model();
    g.kind = ModelKind::gfcf;
    g.weights = SparseSquareMatrix();
    check_same_model(decode_model(encode_model(g)), g);
    Model e = toy_model();
    e.kind = ModelKind::ease;
    e.filter = GraphFilterFactor{};
    e.hp.rank = 0;
    check_same_model(decode_model(encode_model(e)), e);
  }

  TEST_CASE("damaged model files are rejected with a reason") {
    const auto bytes = encode_model(toy_model());
    auto reason_of = [](const std::vector<std::uint8_t>& b) {
      try {
        decode_model(b);
      } catch (const ModelFileError& e) {
        return e.reason();
      }
      FAIL("decode accepted a damaged file");
      return ModelFileError::Reason::io;
    };
    using R = ModelFileError::Reason;

    auto flipped = bytes;
    flipped[bytes.size() / 2] ^= 0x40;
    CHECK(reason_of(flipped) == R::checksum);

    auto header = bytes;
    header[0] = 'X';
    CHECK(reason_of(header) == R::version_mismatch);

    auto version = bytes;
    version[6] = 2;
    CHECK(reason_of(version) == R::version_mismatch);

    for (std::size_t cut : {std::size_t{1}, std::size_t{9}, bytes.size() / 2, bytes.size() - 10}) {
      CHECK(reason_of(std::vector<std::uint8_t>(bytes.begin(), bytes.end() - static_cast<std::ptrdiff_t>(cut))) ==
            R::truncated);
    }
    auto longer = bytes;
    longer.push_back(0);
    CHECK(reason_of(longer) == R::malformed);

    // header fields outside the magic are covered by the checksum
    auto dims = bytes;
    dims[20] ^= 1;
    CHECK_THROWS_AS(decode_model(dims), ModelFileError);

    CHECK_THROWS_AS(load_model(testing::scratch_dir("nofile") / "absent.bin"), ModelFileError);
  }

  TEST_CASE("fnv1a matches published vectors") {
    const std::string a = "a";
    CHECK(fnv1a(reinterpret_cast<const std::uint8_t*>(a.data()), a.size()) == 0xaf63dc4c8601ec8cULL);
    CHECK(fnv1a(nullptr, 0) == 0xcbf29ce484222325ULL);
  }
}
