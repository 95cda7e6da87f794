#include <gtest/gtest.h>

#include "dde/metrics.hpp"

namespace {

using namespace dde;
using V = std::vector<double>;

TEST(Mse, Examples) {
  EXPECT_EQ(mse_ten_thousand(V{5, 6, 7}, V{5, 6, 7}), 0.0);
  EXPECT_DOUBLE_EQ(mse_ten_thousand(V{10000, 20000, 30000}, V{20000, 30000, 40000}), 1.0);
  EXPECT_DOUBLE_EQ(mse_ten_thousand(V{0, 20000}, V{10000, 10000}), 1.0);
  EXPECT_DOUBLE_EQ(mse_ten_thousand(V{0}, V{30000}), 9.0);
}

TEST(Mse, Errors) {
  EXPECT_THROW(mse_ten_thousand(V{1, 2}, V{1}), DataError);
  EXPECT_THROW(mse_ten_thousand(V{}, V{}), DataError);
}

TEST(Pearson, Examples) {
  const V obs{1, 4, 2, 8, 5};
  V affine, neg;
  for (double x : obs) {
    affine.push_back(2 * x + 7);
    neg.push_back(-x);
  }
  EXPECT_NEAR(*pearson(affine, obs), 1.0, 1e-15);
  EXPECT_NEAR(*pearson(neg, obs), -1.0, 1e-15);
  EXPECT_NEAR(*pearson(V{1, 2, 3}, V{1, 3, 2}), 0.5, 1e-15);
}

TEST(Pearson, UndefinedOnZeroVariance) {
  EXPECT_FALSE(pearson(V{3, 3, 3}, V{1, 2, 3}).has_value());
  EXPECT_FALSE(pearson(V{1, 2, 3}, V{0, 0, 0}).has_value());
  EXPECT_THROW(pearson(V{1}, V{1}), DataError);
}

TEST(Aggregate, MeansOverPresentSeries) {
  EvaluationReport r;
  r.infected = score_series(V{0, 20000}, V{10000, 10000});  // mse 1, pearson undefined
  r.recovered = score_series(V{1, 2, 3}, V{1, 3, 2});        // pearson 0.5
  aggregate(r);
  EXPECT_DOUBLE_EQ(r.mean_mse_1e4, (1.0 + r.recovered->mse_1e4) / 2);
  ASSERT_TRUE(r.mean_pearson.has_value());
  EXPECT_NEAR(*r.mean_pearson, 0.5, 1e-15);
  EXPECT_EQ(r.undefined_pearson, 1u);
}

TEST(Aggregate, AllUndefined) {
  EvaluationReport r;
  r.infected = score_series(V{1, 1}, V{2, 2});
  aggregate(r);
  EXPECT_FALSE(r.mean_pearson.has_value());
  EXPECT_EQ(r.undefined_pearson, 1u);
}

}  // namespace
