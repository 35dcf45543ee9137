#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <unistd.h>
#include <filesystem>
#include <fstream>
#include <set>

#include "dhn/covariance.hpp"
#include "dhn/dataset.hpp"
#include "dhn/errors.hpp"
#include "dhn/probability.hpp"

using namespace dhn;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("dhn_test_" + std::to_string(::getpid()) + "_" +
                                        std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  static int& counter() {
    static int c = 0;
    return c;
  }
};

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

Schema basic_schema(DataKind kind) {
  return Schema{kind, {"f0", "f1"}, {"t0", "t1"}};
}

}  // namespace

TEST_CASE("load_csv happy path and validation errors") {
  TempDir dir;
  const fs::path csv = dir.path / "d.csv";

  SUBCASE("well-formed file") {
    write_file(csv, "f0,f1,t0,t1\n1,2,0,3\n-0.5,0.25,1.5,0\n0,0,0,2\n");
    const Dataset d = load_csv(csv, basic_schema(DataKind::continuous));
    CHECK(d.n() == 3);
    CHECK(d.m() == 2);
    CHECK(d.l() == 2);
    CHECK(d.features(1, 0) == doctest::Approx(-0.5));
    CHECK(d.labels(0, 1) == doctest::Approx(3.0));
    CHECK(d.nonzero_fraction() == doctest::Approx(0.5));
  }
  SUBCASE("negative label names the cell") {
    write_file(csv, "f0,f1,t0,t1\n1,2,-1,3\n");
    CHECK_THROWS_WITH_AS(load_csv(csv, basic_schema(DataKind::continuous)),
                         doctest::Contains("row 1, column 't0'"), DataError);
  }
  SUBCASE("fractional count is rejected") {
    write_file(csv, "f0,f1,t0,t1\n1,2,2.5,3\n");
    CHECK_THROWS_WITH_AS(load_csv(csv, basic_schema(DataKind::count)),
                         doctest::Contains("count labels must be integers"), DataError);
  }
  SUBCASE("non-finite feature is rejected") {
    write_file(csv, "f0,f1,t0,t1\nnan,2,0,3\n");
    CHECK_THROWS_AS(load_csv(csv, basic_schema(DataKind::continuous)), DataError);
  }
  SUBCASE("missing schema column") {
    write_file(csv, "f0,t0,t1\n1,0,3\n");
    CHECK_THROWS_WITH_AS(load_csv(csv, basic_schema(DataKind::continuous)),
                         doctest::Contains("missing column 'f1'"), DataError);
  }
  SUBCASE("non-numeric cell carries coordinates") {
    write_file(csv, "f0,f1,t0,t1\n1,two,0,3\n");
    CHECK_THROWS_WITH_AS(load_csv(csv, basic_schema(DataKind::continuous)),
                         doctest::Contains("row 1, column 'f1'"), DataError);
  }
  SUBCASE("quoted fields parse") {
    write_file(csv, "\"f0\",f1,t0,t1\n1,2,0,3\n");
    const Dataset d = load_csv(csv, basic_schema(DataKind::continuous));
    CHECK(d.n() == 1);
  }
}

TEST_CASE("csv round trip preserves matrices exactly") {
  TempDir dir;
  SyntheticConfig cfg;
  cfg.n = 60;
  cfg.m = 3;
  cfg.l = 4;
  cfg.kind = DataKind::continuous;
  cfg.seed = 5;
  auto [data, truth] = generate_synthetic(cfg);
  const fs::path csv = dir.path / "round.csv";
  save_csv(data, csv);
  const Dataset back = load_csv(csv, Schema{data.kind, data.feature_names, data.target_names});
  REQUIRE(back.n() == data.n());
  for (int i = 0; i < data.n(); ++i) {
    for (int j = 0; j < data.m(); ++j) CHECK(back.features(i, j) == data.features(i, j));
    for (int j = 0; j < data.l(); ++j) CHECK(back.labels(i, j) == data.labels(i, j));
  }
}

TEST_CASE("schema round trip") {
  TempDir dir;
  const Schema s{DataKind::count, {"a", "b"}, {"x"}};
  const fs::path p = dir.path / "s.json";
  save_schema(s, p);
  const Schema back = load_schema(p);
  CHECK(back.kind == DataKind::count);
  CHECK(back.features == s.features);
  CHECK(back.targets == s.targets);
  CHECK_THROWS_AS(load_schema(dir.path / "missing.json"), DataError);
}

TEST_CASE("split proportions and determinism") {
  SUBCASE("exact proportions at N=100") {
    const SplitIndex s = split(100, 1);
    CHECK(s.train.size() == 70);
    CHECK(s.val.size() == 15);
    CHECK(s.test.size() == 15);
  }
  SUBCASE("remainder goes to train at N=101") {
    const SplitIndex s = split(101, 1);
    CHECK(s.train.size() == 71);
    CHECK(s.val.size() == 15);
    CHECK(s.test.size() == 15);
  }
  SUBCASE("same seed, same split") {
    const SplitIndex a = split(57, 99);
    const SplitIndex b = split(57, 99);
    CHECK(a.train == b.train);
    CHECK(a.val == b.val);
    CHECK(a.test == b.test);
  }
  SUBCASE("too small") { CHECK_THROWS_AS(split(9, 1), UsageError); }
  SUBCASE("disjoint and covering across 50 seeds") {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      const SplitIndex s = split(83, seed);
      std::set<int> seen;
      for (const auto* part : {&s.train, &s.val, &s.test}) {
        for (int i : *part) {
          CHECK(seen.insert(i).second);
          CHECK(i >= 0);
          CHECK(i < 83);
        }
      }
      CHECK(seen.size() == 83);
    }
  }
}

TEST_CASE("batches") {
  const std::vector<int> idx{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  SUBCASE("sizes 4,4,2") {
    const auto bs = batches(idx, 4, prob::RngStream(3));
    REQUIRE(bs.size() == 3);
    CHECK(bs[0].size() == 4);
    CHECK(bs[1].size() == 4);
    CHECK(bs[2].size() == 2);
  }
  SUBCASE("same stream, identical batching; different epochs differ") {
    const auto a = batches(idx, 3, prob::RngStream(1).derive(0));
    const auto b = batches(idx, 3, prob::RngStream(1).derive(0));
    CHECK(a == b);
    const auto c = batches(idx, 3, prob::RngStream(1).derive(1));
    CHECK(a != c);
    // Same multiset either way.
    std::multiset<int> ma, mc;
    for (const auto& batch : a) ma.insert(batch.begin(), batch.end());
    for (const auto& batch : c) mc.insert(batch.begin(), batch.end());
    CHECK(ma == mc);
  }
}

TEST_CASE("standardizer") {
  Matd f(4, 2);
  f(0, 0) = 1;  f(0, 1) = 7;
  f(1, 0) = 3;  f(1, 1) = 7;
  f(2, 0) = 5;  f(2, 1) = 7;
  f(3, 0) = 100; f(3, 1) = 100;  // not in the training split
  const std::vector<int> train_rows{0, 1, 2};
  const Standardizer s = fit_standardizer(f, train_rows);

  SUBCASE("train rows have mean zero afterwards") {
    const Matd out = s.apply(f);
    double mean0 = (out(0, 0) + out(1, 0) + out(2, 0)) / 3.0;
    CHECK(std::abs(mean0) < 1e-12);
  }
  SUBCASE("constant feature passes through centered, scale one") {
    CHECK(s.scale[1] == 1.0);
    const Matd out = s.apply(f);
    CHECK(out(0, 1) == doctest::Approx(0.0));
  }
  SUBCASE("held-out rows use training statistics") {
    const Matd out = s.apply(f);
    CHECK(out(3, 0) == doctest::Approx((100.0 - 3.0) / s.scale[0]));
    CHECK(out(3, 1) == doctest::Approx(93.0));
  }
}

TEST_CASE("synthetic generator") {
  SUBCASE("zero mean map gives ~50% positives per target") {
    SyntheticConfig cfg;
    cfg.n = 10000;
    cfg.m = 3;
    cfg.l = 4;
    cfg.kind = DataKind::continuous;
    cfg.seed = 11;
    cfg.mu_scale = 1e-9;  // mu ~ 0 for every row
    auto [data, truth] = generate_synthetic(cfg);
    for (int j = 0; j < cfg.l; ++j) {
      int pos = 0;
      for (int i = 0; i < cfg.n; ++i) pos += data.labels(i, j) > 0.0;
      CHECK(std::abs(pos / static_cast<double>(cfg.n) - 0.5) < 0.02);
    }
  }
  SUBCASE("positive latent correlation shows up in the binary patterns") {
    SyntheticConfig cfg;
    cfg.n = 20000;
    cfg.m = 3;
    cfg.l = 3;
    cfg.kind = DataKind::continuous;
    cfg.seed = 12;
    cfg.correlation = 0.6;
    cfg.mu_scale = 1e-9;
    auto [data, truth] = generate_synthetic(cfg);
    for (int a = 0; a < cfg.l; ++a) {
      for (int b = 0; b < a; ++b) {
        double mean_a = 0.0;
        double mean_b = 0.0;
        double cov = 0.0;
        for (int i = 0; i < cfg.n; ++i) {
          mean_a += data.labels(i, a) > 0;
          mean_b += data.labels(i, b) > 0;
        }
        mean_a /= cfg.n;
        mean_b /= cfg.n;
        for (int i = 0; i < cfg.n; ++i) {
          cov += ((data.labels(i, a) > 0) - mean_a) * ((data.labels(i, b) > 0) - mean_b);
        }
        CHECK(cov / cfg.n > 0.02);
      }
    }
  }
  SUBCASE("count data has no zeros at gated-positive positions and is integral") {
    SyntheticConfig cfg;
    cfg.n = 2000;
    cfg.m = 4;
    cfg.l = 3;
    cfg.kind = DataKind::count;
    cfg.seed = 13;
    auto [data, truth] = generate_synthetic(cfg);
    data.validate();
    for (double v : data.labels.data) {
      CHECK(v == std::floor(v));
    }
    CHECK(data.nonzero_fraction() > 0.3);
  }
  SUBCASE("same config twice gives identical datasets") {
    SyntheticConfig cfg;
    cfg.n = 200;
    cfg.m = 3;
    cfg.l = 2;
    cfg.kind = DataKind::count;
    cfg.seed = 21;
    auto [a, ta] = generate_synthetic(cfg);
    auto [b, tb] = generate_synthetic(cfg);
    CHECK(a.features.data == b.features.data);
    CHECK(a.labels.data == b.labels.data);
    CHECK(ta.a_mu.data == tb.a_mu.data);
  }
}

TEST_CASE("generator marginal frequencies match the probit map") {
  SyntheticConfig cfg;
  cfg.n = 100000;
  cfg.m = 4;
  cfg.l = 3;
  cfg.kind = DataKind::continuous;
  cfg.seed = 31;
  cfg.correlation = 0.4;
  cfg.mu_scale = 1.3;
  auto [data, truth] = generate_synthetic(cfg);
  const Matd sigma = sigma_matrix(truth.c);
  for (int j = 0; j < cfg.l; ++j) {
    double expect = 0.0;
    for (int i = 0; i < cfg.n; ++i) {
      double mu = 0.0;
      for (int t = 0; t < cfg.m; ++t) mu += truth.a_mu(j, t) * data.features(i, t);
      expect += prob::std_normal_cdf(mu / std::sqrt(sigma(j, j)));
    }
    expect /= cfg.n;
    int pos = 0;
    for (int i = 0; i < cfg.n; ++i) pos += data.labels(i, j) > 0.0;
    CHECK(std::abs(pos / static_cast<double>(cfg.n) - expect) < 0.01);
  }
}

TEST_CASE("dataset validate catches corrupt content") {
  Dataset d;
  d.kind = DataKind::continuous;
  d.feature_names = {"f0"};
  d.target_names = {"t0"};
  d.features = Matd(2, 1, 0.0);
  d.labels = Matd(2, 1, 1.0);
  d.validate();
  SUBCASE("nan feature") {
    d.features(1, 0) = std::nan("");
    CHECK_THROWS_WITH_AS(d.validate(), doctest::Contains("row 1"), DataError);
  }
  SUBCASE("all-zero labels are untrainable") {
    d.labels = Matd(2, 1, 0.0);
    CHECK_THROWS_AS(d.validate(), DataError);
  }
}
