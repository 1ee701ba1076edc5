#include <gtest/gtest.h>

#include "helpers.hpp"
#include "nsflows/io.hpp"

using namespace nsflows;

namespace {

std::string field_of(const std::string& text) {
  try {
    (void)parse_config(parse_json_text(text, "test"));
  } catch (const ConfigError& e) {
    return e.field();
  }
  return "";
}

}  // namespace

TEST(Config, EmptyObjectGivesFlowComparisonDefaults) {
  const Config cfg = parse_config(Json::object());
  const auto& e = cfg.experiment;
  EXPECT_EQ(e.flow.mode, FlowMode::wfr);
  EXPECT_DOUBLE_EQ(e.flow.sinkhorn.epsilon, 0.05);
  EXPECT_EQ(e.flow.sinkhorn.max_iters, 25U);
  EXPECT_DOUBLE_EQ(e.flow.tau, 0.03);
  EXPECT_DOUBLE_EQ(e.flow.lambda0, 0.05);
  EXPECT_DOUBLE_EQ(e.flow.prior_drift_weight, 0.1);
  EXPECT_EQ(e.flow.particles, 50U);
  EXPECT_EQ(e.n, 1000U);
  EXPECT_EQ(e.target, "paw");
  EXPECT_FALSE(e.flow.diffusion);
  EXPECT_FALSE(cfg.data.has_value());
}

TEST(Config, RangeAndTypeErrorsNameTheField) {
  EXPECT_EQ(field_of(R"({"flow": {"tau": -1}})"), "flow.tau");
  EXPECT_EQ(field_of(R"({"flow": {"taux": 1}})"), "flow.taux");
  EXPECT_EQ(field_of(R"({"lambda": 1})"), "lambda");
  EXPECT_EQ(field_of(R"({"n": -5})"), "n");
  EXPECT_EQ(field_of(R"({"n": 2.5})"), "n");
  EXPECT_EQ(field_of(R"({"sinkhorn": {"epsilon": 0}})"), "sinkhorn.epsilon");
  EXPECT_EQ(field_of(R"({"flow": {"mode": "jko"}})"), "flow.mode");
  EXPECT_EQ(field_of(R"({"flow": {"resample": 1}})"), "flow.resample");
  EXPECT_EQ(field_of(R"({"flow": {"alpha_schedule": {"kind": "power", "gamma": 0.3}}})"), "flow.alpha_schedule.gamma");
  EXPECT_EQ(field_of(R"({"kernel": {"bandwidth": 0}})"), "kernel.bandwidth");
  EXPECT_EQ(field_of(R"({"prior": {"base_cov": [[1, 2], [2, 1]]}})"), "prior.base_cov");
  EXPECT_EQ(field_of(R"({"init": {"atoms": [[0, 0]], "weights": [1, 2]}})"), "init.weights");
  EXPECT_EQ(field_of(R"({"data": [[1, 2, 3]]})"), "data");
  EXPECT_EQ(field_of("{\"n\": "), "test");
  EXPECT_EQ(field_of(R"({"flow": {"tau": 0}})"), "");
}

TEST(Config, RoundTripIsAFixedPoint) {
  const std::string text = R"({
    "seed": 99, "n": 120, "n_grid": [10, 30], "replicates": 4,
    "kernel": {"bandwidth": 0.5},
    "prior": {"discount": 0.0, "concentration": 2.5, "base_mean": [1, -1], "truncation": 8},
    "flow": {"mode": "fisher_rao", "alpha_schedule": {"kind": "power", "gamma": 0.75}, "dt": 0.01,
             "lambda_schedule": {"kind": "log_anneal", "c": 0.3}, "M": 3, "N": 7, "resample": false,
             "diffusion": true, "reaction_cap": 1.5, "drift_taming": true},
    "sinkhorn": {"epsilon": 0.1, "max_iters": 40, "tol": 1e-7},
    "data": [[0.1, 0.2], [0.3, -0.4]],
    "init": {"atoms": [[0, 0], [1, 1]], "weights": [0.25, 0.75]}
  })";
  const Config first = parse_config(parse_json_text(text, "test"));
  const Json once = serialise_config(first);
  const Config second = parse_config(once);
  EXPECT_EQ(serialise_config(second), once);
  EXPECT_EQ(second.experiment.flow.mode, FlowMode::fisher_rao);
  EXPECT_EQ(*second.experiment.flow.dt, 0.01);
  EXPECT_EQ(second.init->weight(1), 0.75);
  EXPECT_EQ(second.data->cols(), 2);
  EXPECT_EQ(serialise_config(parse_config(serialise_config(parse_config(Json::object())))),
            serialise_config(parse_config(Json::object())));
}

TEST(Config, BaseDefaultsApplyPerStudy) {
  const Config cfg = parse_config(Json::object(), ExperimentConfig::bootstrap_defaults());
  EXPECT_EQ(cfg.experiment.target, "four");
  EXPECT_DOUBLE_EQ(cfg.experiment.prior.base_cov(1, 1), 9.0);
}

TEST(Io, DoubleFormattingRoundTrips) {
  for (double v : {0.1, -2.5e-7, 5e-309, 1.0 / 3.0, 123456789.0}) EXPECT_EQ(parse_double(format_double(v)), v);
  EXPECT_THROW((void)parse_double("1.5x"), InvalidArgument);
}

TEST(Io, Sha256KnownDigest) {
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Io, AtomicWriteAndCsvRead) {
  const auto dir = std::filesystem::temp_directory_path() / "nsflows_io_test";
  std::filesystem::remove_all(dir);
  write_file_atomic(dir / "t.csv", "a,b\n1,x\n2,y\n");
  const CsvTable t = read_csv(dir / "t.csv");
  EXPECT_EQ(t.rows.size(), 2U);
  EXPECT_EQ(t.rows[1][t.column("b")], "y");
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    EXPECT_EQ(entry.path().filename(), "t.csv");
  }
  std::filesystem::remove_all(dir);
}
