#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "fairpls/config.hpp"
#include "fairpls/data.hpp"
#include "fairpls/error.hpp"
#include "fairpls/metrics.hpp"
#include "test_util.hpp"

using namespace fairpls;

namespace {

EncodingSpec ab_spec() {
  EncodingSpec spec;
  spec.rules = {{"a", ColumnRule::passthrough()}, {"b", ColumnRule::one_hot()}};
  return spec;
}

}  // namespace

TEST(Csv, ParsesNumericAndCategorical) {
  Dataset ds = parse_csv("a,b\n1,x\n2,y\n3,x\n", ab_spec());
  EXPECT_EQ(ds.rows(), 3u);
  const Column& b = ds.column("b");
  EXPECT_EQ(b.kind, ColumnKind::categorical);
  EXPECT_EQ(b.levels, (std::vector<std::string>{"x", "y"}));
  EXPECT_EQ(ds.column("a").values, (std::vector<double>{1, 2, 3}));
}

TEST(Csv, NonNumericTokenReportsPosition) {
  try {
    parse_csv("a,b\n1,x\nfoo,y\n", ab_spec());
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.row(), 3u);
    EXPECT_EQ(e.column(), 1u);
  }
}

TEST(Csv, QuotedFieldsAndFilters) {
  EncodingSpec spec;
  spec.rules = {{"a", ColumnRule::passthrough()}, {"g", ColumnRule::binary({{"p", 1}, {"q", 0}})}};
  spec.row_filter = {{"g", {"p", "q"}}};
  Dataset ds = parse_csv("a,g,extra\n1,p,\"x,y\"\n2,r,z\n3,q,w\n", spec);
  ASSERT_EQ(ds.rows(), 2u);
  EXPECT_EQ(ds.column("g").values, (std::vector<double>{1, 0}));
  EXPECT_FALSE(ds.has_column("extra"));
}

TEST(Csv, FilterAnyKeepsRowsMatchingEitherColumn) {
  EncodingSpec spec;
  spec.rules = {{"a", ColumnRule::passthrough()}, {"w", ColumnRule::passthrough()}};
  spec.row_filter_any = {{"w", {"1"}}, {"b", {"1"}}};
  Dataset ds = parse_csv("a,w,b\n1,1,0\n2,0,1\n3,0,0\n", spec);
  EXPECT_EQ(ds.column("a").values, (std::vector<double>{1, 2}));
}

TEST(Csv, ThresholdRule) {
  EncodingSpec spec;
  spec.rules = {{"age", ColumnRule::greater_than(25)}};
  Dataset ds = parse_csv("age\n20\n25\n26\n", spec);
  EXPECT_EQ(ds.column("age").kind, ColumnKind::binary);
  EXPECT_EQ(ds.column("age").values, (std::vector<double>{0, 0, 1}));
}

TEST(Csv, UnmappedBinaryTokenIsAnError) {
  EncodingSpec spec;
  spec.rules = {{"g", ColumnRule::binary({{"p", 1}, {"q", 0}})}};
  EXPECT_THROW(parse_csv("g\np\nz\n", spec), ParseError);
}

TEST(Csv, MissingColumnIsAnError) {
  EXPECT_THROW(parse_csv("a\n1\n2\n", ab_spec()), Error);
}

TEST(Centering, ZeroMeanColumn) {
  Matrix raw(3, 1);
  raw << 1, 2, 3;
  CenteredMatrix c = CenteredMatrix::fit(raw);
  EXPECT_DOUBLE_EQ(c.col_means()(0), 2.0);
  EXPECT_DOUBLE_EQ(c.values()(0, 0), -1.0);
  EXPECT_DOUBLE_EQ(c.values()(1, 0), 0.0);
  EXPECT_DOUBLE_EQ(c.values()(2, 0), 1.0);
}

TEST(Centering, OneHotDropFirst) {
  EncodingSpec spec;
  spec.rules = {{"b", ColumnRule::one_hot(true)}};
  CenteredMatrix c = encode_center(parse_csv("b\nx\ny\nx\n", spec), spec);
  ASSERT_EQ(c.cols(), 1);
  EXPECT_NEAR(c.values()(0, 0), -1.0 / 3, 1e-15);
  EXPECT_NEAR(c.values()(1, 0), 2.0 / 3, 1e-15);
  EXPECT_NEAR(c.values()(2, 0), -1.0 / 3, 1e-15);
}

TEST(Centering, ConstantColumnDroppedUnderStandardize) {
  Matrix raw(3, 2);
  raw << 5, 1, 5, 2, 5, 4;
  CenteredMatrix c = CenteredMatrix::fit(raw, Normalization::standardize, {"const", "v"});
  EXPECT_EQ(c.cols(), 1);
  EXPECT_EQ(c.stats().kept, (std::vector<Index>{1}));
  EXPECT_FALSE(c.warnings().empty());
}

TEST(Centering, ApplyStats) {
  CenteringStats st;
  st.input_cols = 1;
  st.kept = {0};
  st.means = Vector::Constant(1, 2.0);
  st.scales = Vector::Constant(1, 1.0);
  EXPECT_DOUBLE_EQ(apply_centering(st, Matrix::Constant(1, 1, 2.0)).values()(0, 0), 0.0);
  st.means(0) = 0.0;
  st.scales(0) = 2.0;
  EXPECT_DOUBLE_EQ(apply_centering(st, Matrix::Constant(1, 1, 4.0)).values()(0, 0), 2.0);
  st.input_cols = 3;
  st.kept = {0, 1, 2};
  st.means = Vector::Zero(3);
  st.scales = Vector::Ones(3);
  try {
    apply_centering(st, Matrix::Zero(2, 2));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::dimension_mismatch);
  }
}

TEST(Centering, RoundTripAndMeanInvariantOverSeeds) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    const Index n = tu::uniform_int(rng, 5, 80), d = tu::uniform_int(rng, 1, 10);
    Matrix raw = tu::randn(n, d, rng) * 7.0 + Matrix::Constant(n, d, 3.0);
    for (auto norm : {Normalization::none, Normalization::standardize}) {
      CenteredMatrix c = CenteredMatrix::fit(raw, norm);
      CenteredMatrix again = apply_centering(c.stats(), raw);
      EXPECT_LE((again.values() - c.values()).cwiseAbs().maxCoeff(), 1e-12);
      const double scale = c.values().cwiseAbs().maxCoeff();
      EXPECT_LE(c.values().colwise().mean().cwiseAbs().maxCoeff(), 1e-10 * scale);
    }
  }
}

TEST(Centering, RequireCenteredRejectsRawData) {
  Matrix raw = Matrix::Constant(4, 2, 1.0);
  raw(0, 0) = 3;
  EXPECT_THROW(CenteredMatrix::from_centered(raw), Error);
  CenteredMatrix never;
  EXPECT_THROW(require_centered(never, "X"), Error);
}

TEST(Synthetic, DefaultsShapeAndMeans) {
  SyntheticParams p = default_synthetic_params();
  EXPECT_EQ(p.n_per_group, 500);
  Vector m0(7), m1(7);
  m0 << 9, 8, 10, 10, 0, 0, 0;
  m1 << 10, 10, 10, 10, 0, 0, 0;
  EXPECT_EQ(p.mean_0, m0);
  EXPECT_EQ(p.mean_1, m1);
  Dataset ds = gen_synthetic(p);
  EXPECT_EQ(ds.rows(), 1000u);
  int features = 0;
  for (const auto& c : ds.columns())
    if (c.name != "y" && c.name != "s") ++features;
  EXPECT_EQ(features, 7);
  EXPECT_TRUE(ds.has_column("s"));
}

TEST(Synthetic, Deterministic) {
  SyntheticParams p = default_synthetic_params();
  p.seed = 42;
  Dataset a = gen_synthetic(p), b = gen_synthetic(p);
  for (std::size_t j = 0; j < a.cols(); ++j) EXPECT_EQ(a.columns()[j].values, b.columns()[j].values);
}

TEST(Synthetic, GroupMeanConverges) {
  SyntheticParams p = default_synthetic_params();
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    p.seed = seed;
    Dataset ds = gen_synthetic(p);
    const auto& s = ds.column("s").values;
    for (int j = 0; j < 7; ++j) {
      const auto& x = ds.column("x" + std::to_string(j + 1)).values;
      double sum = 0;
      int cnt = 0;
      for (std::size_t i = 0; i < x.size(); ++i)
        if (s[i] == 0) {
          sum += x[i];
          ++cnt;
        }
      EXPECT_EQ(cnt, 500);
      EXPECT_LE(std::abs(sum / cnt - p.mean_0(j)), 0.3) << "seed " << seed << " col " << j;
    }
  }
}

// Identical group distributions: a threshold-on-y classifier has DI close to 1.
TEST(Synthetic, IdenticalGroupsGiveParity) {
  SyntheticParams p;
  p.n_per_group = 500;
  p.mean_0 = p.mean_1 = Vector::Zero(7);
  p.cov_0 = p.cov_1 = Matrix::Identity(7, 7);
  p.target_coeffs_0 = p.target_coeffs_1 = Vector::Ones(7);
  p.noise_sd_0 = p.noise_sd_1 = 1.0;
  double sum = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    p.seed = seed;
    Dataset ds = gen_synthetic(p);
    const auto& y = ds.column("y").values;
    const auto& s = ds.column("s").values;
    std::vector<int> yhat, g;
    for (std::size_t i = 0; i < y.size(); ++i) {
      yhat.push_back(y[i] > 0 ? 1 : 0);
      g.push_back(static_cast<int>(s[i]));
    }
    const double di = disparate_impact(yhat, g).di;
    EXPECT_NEAR(di, 1.0, 0.25) << "seed " << seed;  // about 4 binomial sd per seed
    sum += di;
  }
  EXPECT_NEAR(sum / 10, 1.0, 0.1);
}

TEST(Synthetic, RejectsNonPsdCovariance) {
  SyntheticParams p = default_synthetic_params();
  p.cov_0(0, 0) = -1.0;
  EXPECT_THROW(gen_synthetic(p), Error);
}

TEST(Folds, DisjointCover) {
  auto folds = split_folds(6, 3, 1);
  ASSERT_EQ(folds.size(), 3u);
  std::set<std::size_t> seen;
  for (const auto& f : folds) {
    EXPECT_EQ(f.test.size(), 2u);
    EXPECT_EQ(f.train.size(), 4u);
    for (auto i : f.test) EXPECT_TRUE(seen.insert(i).second);
  }
  EXPECT_EQ(seen.size(), 6u);
}

TEST(Folds, LeaveOneOut) {
  auto folds = split_folds(7, 7, 0);
  for (const auto& f : folds) EXPECT_EQ(f.test.size(), 1u);
}

TEST(Folds, TooManyFolds) { EXPECT_THROW(split_folds(3, 5, 0), Error); }

TEST(Folds, TrainTestSplit) {
  Fold f = split_train_test(10, 0.7, 3);
  EXPECT_EQ(f.train.size(), 7u);
  EXPECT_EQ(f.test.size(), 3u);
  std::vector<std::size_t> all = f.train;
  all.insert(all.end(), f.test.begin(), f.test.end());
  std::sort(all.begin(), all.end());
  for (std::size_t i = 0; i < 10; ++i) EXPECT_EQ(all[i], i);
}

TEST(Config, ScalarsListsMaps) {
  KvConfig c = KvConfig::parse(
      "# comment\n"
      "a = 1.5\n"
      "b = [1, 2,\n  3]   # trailing\n"
      "m = {x: 1, \"y z\": [a, b]}\n"
      "flag = true\n");
  EXPECT_DOUBLE_EQ(c.at("a").as_double(), 1.5);
  EXPECT_EQ(c.at("b").as_doubles(), (std::vector<double>{1, 2, 3}));
  ASSERT_NE(c.at("m").find("y z"), nullptr);
  EXPECT_EQ(c.at("m").find("y z")->as_strings(), (std::vector<std::string>{"a", "b"}));
  EXPECT_TRUE(c.get_bool("flag", false));
  EXPECT_EQ(c.get_int("missing", 7), 7);
}

TEST(Config, DuplicateKeyAndBadSyntax) {
  EXPECT_THROW(KvConfig::parse("a = 1\na = 2\n"), ParseError);
  EXPECT_THROW(KvConfig::parse("a = [1, 2\n"), ParseError);
  EXPECT_THROW(KvConfig::parse("novalue\n"), ParseError);
}
