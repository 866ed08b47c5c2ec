#include "test_support.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace mdro;
using namespace mdro::testing;

TEST(DatasetCsv, RoundTripBitExact) {
  SimSpec s;
  s.variant = SimVariant::confounded;
  s.n = 50;
  s.d = 3;
  s.seed = 1;
  const Dataset d = generate_replicates(s, 4);
  std::stringstream ss;
  write_dataset_csv(ss, d);
  const Dataset back = read_dataset_csv(ss);
  EXPECT_TRUE(back.features == d.features);
  EXPECT_TRUE(back.labels == d.labels);
  ASSERT_TRUE(back.replicates && back.group && back.confounder);
  EXPECT_TRUE(*back.replicates == *d.replicates);
  EXPECT_TRUE(*back.group == *d.group);
  EXPECT_TRUE(*back.confounder == *d.confounder);
}

TEST(DatasetCsv, HeaderLayout) {
  Dataset d;
  d.features = RowMatrix::Zero(1, 2);
  d.labels = Vector::Ones(1);
  std::ostringstream os;
  write_dataset_csv(os, d);
  EXPECT_EQ(os.str(), "x0,x1,y\n0,0,1\n");
}

TEST(DatasetCsv, ColumnOrderFree) {
  std::istringstream is("y,x1,x0\n1,2,3\n4,5,6\n");
  const Dataset d = read_dataset_csv(is);
  EXPECT_EQ(d.features(0, 0), 3.0);
  EXPECT_EQ(d.features(1, 1), 5.0);
  EXPECT_EQ(d.labels(1), 4.0);
}

TEST(DatasetCsv, MalformedRejected) {
  for (const char* text : {"x0,y,w\n1,2,3\n", "x0,x2,y\n1,2,3\n", "x0,y\n1\n", "x0,y\n1,abc\n", "x0\n1\n", "",
                           "x0,y\n"}) {
    std::istringstream is(text);
    EXPECT_THROW(read_dataset_csv(is), std::exception) << text;
  }
}

TEST(DatasetCsv, MissingFileNamesPath) {
  try {
    read_dataset_csv(std::string("/nonexistent/dir/data.csv"));
    FAIL();
  } catch (const io_error& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent/dir/data.csv"), std::string::npos);
  }
}

TEST(SignedLabels, Conversion) {
  Vector y(3);
  y << 0, 1, 0;
  EXPECT_EQ(to_signed_labels(y), Vector((Vector(3) << -1, 1, -1).finished()));
  y << -1, 1, 1;
  EXPECT_EQ(to_signed_labels(y), y);
  y << 0, 2, 1;
  EXPECT_THROW(to_signed_labels(y), std::invalid_argument);
}

TEST(ModelFile, RoundTrip) {
  Rand r(2);
  const ParamVector p(random_vector(r, 4, -3, 3), -0.123456789012345);
  std::stringstream ss;
  write_model(ss, p);
  const ParamVector q = read_model(ss);
  EXPECT_TRUE(q.theta == p.theta);
  EXPECT_EQ(q.intercept, p.intercept);
  std::istringstream bad("0.5\n");
  EXPECT_THROW(read_model(bad), io_error);
}

TEST(NumberFormat, ShortestRoundTrip) {
  Rand r(3);
  for (int t = 0; t < 1000; ++t) {
    const double v = uni(r, -1e6, 1e6) * std::pow(10.0, uni(r, -20, 20));
    EXPECT_EQ(parse_double(format_double(v)), v);
  }
  EXPECT_THROW(parse_double("1.0x"), io_error);
  EXPECT_THROW(parse_double(""), io_error);
}

TEST(Config, CommentsAndWhitespace) {
  std::istringstream is("# header\n alpha0 = 0.1  # tail\n\nobjective=erm\n");
  const ConfigMap m = parse_config(is);
  EXPECT_EQ(m.at("alpha0"), "0.1");
  EXPECT_EQ(m.at("objective"), "erm");
  EXPECT_EQ(m.size(), 2u);
}

TEST(Config, DuplicateAndMalformedRejected) {
  std::istringstream dup("n=1\nn=2\n");
  EXPECT_THROW(parse_config(dup), io_error);
  std::istringstream noeq("n 1\n");
  EXPECT_THROW(parse_config(noeq), io_error);
}

TEST(Config, UnknownKeyRejected) {
  ExperimentConfig cfg;
  EXPECT_THROW(apply_config(cfg, ConfigMap{{"alpha", "0.1"}}), usage_error);
}

TEST(Config, FlagsOverrideFile) {
  const ExperimentConfig cfg =
      make_config(ConfigMap{{"alpha0", "0.1"}, {"n", "50"}}, ConfigMap{{"alpha0", "0.2"}, {"lipschitz_ratio", "1,10"}});
  EXPECT_DOUBLE_EQ(cfg.alpha0, 0.2);
  EXPECT_EQ(cfg.n, 50);
  ASSERT_TRUE(cfg.lipschitz_ratio);
  EXPECT_EQ(cfg.lipschitz_ratio->size(), 2u);
}

TEST(Config, BadValuesRejected) {
  ExperimentConfig cfg;
  EXPECT_THROW(apply_config(cfg, ConfigMap{{"n", "0"}}), usage_error);
  EXPECT_THROW(apply_config(cfg, ConfigMap{{"alpha0", "x"}}), usage_error);
  EXPECT_THROW(apply_config(cfg, ConfigMap{{"intercept", "maybe"}}), usage_error);
  EXPECT_THROW(apply_config(cfg, ConfigMap{{"binary_cols", "1.5"}}), usage_error);
}

TEST(Config, SeedFallsBackToEnvironment) {
  ExperimentConfig cfg;
  ::setenv("DRO_SEED", "77", 1);
  EXPECT_EQ(cfg.resolved_seed(), 77u);
  cfg.seed = 5;
  EXPECT_EQ(cfg.resolved_seed(), 5u);
  ::unsetenv("DRO_SEED");
  cfg.seed.reset();
  EXPECT_EQ(cfg.resolved_seed(), 0u);
}
