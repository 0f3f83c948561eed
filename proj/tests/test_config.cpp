#include "mf/config.hpp"

#include <string>

#include "doctest.h"
#include "mf/errors.hpp"

using namespace mf;

TEST_CASE("defaults survive an empty config") {
  const RunConfig c = parse_run_config("");
  CHECK(c.subjects == 3);
  CHECK(c.duration == doctest::Approx(60.0));
  CHECK(c.seed == 1);
  CHECK(c.out_dir == "out");
  CHECK(c.set_id == 4);
  CHECK(c.t_wi == 30);
  CHECK(c.t_wo == 30);
  CHECK(c.stride == 3);
  CHECK(c.family == "bilstm");
  CHECK(c.hidden == 32);
  CHECK(c.dropout == doctest::Approx(0.2));
  CHECK(c.epochs == 30);
  CHECK(c.batch_size == 64);
  CHECK(c.lr == doctest::Approx(1e-3));
  CHECK(c.n_pre == 30);
  CHECK(c.mlp_hidden == std::vector<int>{64, 64});
  CHECK(c.trees == 10);
  CHECK(c.train_fraction == doctest::Approx(0.7));
  CHECK(c.tests == std::vector<int>{1});
  CHECK(c.mode == "all");
  CHECK(c.pool == 0);
  validate_config(c);
}

TEST_CASE("keys, comments and whitespace parse") {
  const std::string text =
      "# full-line comment\n"
      "subjects = 8\n"
      "duration = 600.0   # trailing comment\n"
      "\n"
      "seed = 42\n"
      "out_dir = \"runs/a # not a comment\"\n"
      "family = \"extra_trees\"\n"
      "tests = [2, 4]\n"
      "mlp_hidden = [32, 16, 8]\n"
      "subject.2.lookahead_gain = 1.5\n"
      "subject.2.steering_lag = 0.25\n";
  const RunConfig c = parse_run_config(text);
  CHECK(c.subjects == 8);
  CHECK(c.duration == doctest::Approx(600.0));
  CHECK(c.seed == 42);
  CHECK(c.out_dir == "runs/a # not a comment");
  CHECK(c.family == "extra_trees");
  CHECK(c.tests == std::vector<int>{2, 4});
  CHECK(c.mlp_hidden == std::vector<int>{32, 16, 8});
  REQUIRE(c.subject_overrides.count(2) == 1);
  CHECK(c.subject_overrides.at(2).at("lookahead_gain") == doctest::Approx(1.5));
  CHECK(c.subject_overrides.at(2).at("steering_lag") == doctest::Approx(0.25));
}

TEST_CASE("malformed input is rejected") {
  CHECK_THROWS_AS((void)parse_run_config("no_such_key = 3\n"), InvalidConfig);
  CHECK_THROWS_AS((void)parse_run_config("subjects\n"), InvalidConfig);
  CHECK_THROWS_AS((void)parse_run_config("subjects = many\n"), InvalidConfig);
  CHECK_THROWS_AS((void)parse_run_config("duration = \n"), InvalidConfig);
  CHECK_THROWS_AS((void)parse_run_config("out_dir = bare\n"), InvalidConfig);
  CHECK_THROWS_AS((void)parse_run_config("tests = 1, 2\n"), InvalidConfig);
  CHECK_THROWS_AS((void)parse_run_config("tests = [1, 2\n"), InvalidConfig);
  CHECK_THROWS_AS((void)parse_run_config("subject.x.lookahead_gain = 1\n"),
                  InvalidConfig);
  CHECK_THROWS_AS((void)parse_run_config("subject.1.no_field = 1\n"),
                  InvalidConfig);
}

TEST_CASE("validation guards ranges and couplings") {
  const auto reject = [](const std::string& line) {
    RunConfig c = parse_run_config(line);
    CHECK_THROWS_AS(validate_config(c), InvalidConfig);
  };
  reject("subjects = 0\n");
  reject("duration = 0\n");
  reject("dt = -0.1\n");
  reject("set_id = 6\n");
  reject("t_wi = 0\n");
  reject("stride = 0\n");
  reject("family = \"cnn\"\n");
  reject("hidden = 0\n");
  reject("dropout = 1.0\n");
  reject("train_fraction = 1.0\n");
  reject("tests = [5]\n");
  reject("tests = [1, 1]\n");
  reject("tests = []\n");
  reject("mode = \"solo\"\n");
  reject("pool = 9\n");
  reject("subject.7.lookahead_gain = 1\n");  // default has 3 subjects
  // the sequence family needs matching window sides
  reject("t_wi = 20\n");
  RunConfig uneven = parse_run_config("t_wi = 20\nfamily = \"mlp\"\n");
  CHECK_NOTHROW(validate_config(uneven));
}

TEST_CASE("protocol config mirrors the run config") {
  const RunConfig c = parse_run_config(
      "hidden = 16\ndropout = 0.1\nepochs = 3\nbatch_size = 32\n"
      "lr = 0.002\nn_pre = 10\ntrees = 5\nmin_leaf = 4\n"
      "train_fraction = 0.8\nsplit_seed = 11\ntrain_seed = 12\n"
      "mlp_hidden = [24]\nmlp_epochs = 50\n");
  const ProtocolConfig pc = to_protocol_config(c);
  CHECK(pc.hidden == 16);
  CHECK(pc.dropout == doctest::Approx(0.1));
  CHECK(pc.epochs == 3);
  CHECK(pc.batch_size == 32);
  CHECK(pc.lr == doctest::Approx(0.002));
  CHECK(pc.n_pre == 10);
  CHECK(pc.mlp.hidden == std::vector<int>{24});
  CHECK(pc.mlp.epochs == 50);
  CHECK(pc.mlp.batch_size == 32);
  CHECK(pc.mlp.lr == doctest::Approx(0.002));
  CHECK(pc.trees.n_estimators == 5);
  CHECK(pc.trees.min_samples_leaf == 4);
  CHECK(pc.split.train_fraction == doctest::Approx(0.8));
  CHECK(pc.split.seed == 11);
  CHECK(pc.seed == 12);
}

TEST_CASE("family names map to the three model families") {
  CHECK(family_from_string("bilstm") == ModelFamily::BiLstm);
  CHECK(family_from_string("mlp") == ModelFamily::Mlp);
  CHECK(family_from_string("extra_trees") == ModelFamily::ExtraTrees);
  CHECK_THROWS_AS((void)family_from_string("svm"), InvalidConfig);
}

TEST_CASE("profile overrides change exactly the named field") {
  RunConfig c = parse_run_config("subject.1.noise_joint_xy = 0.008\n");
  DriverProfile p;
  p.subject_id = 1;
  const DriverProfile before = p;
  apply_profile_overrides(p, c.subject_overrides.at(1));
  CHECK(p.noise_joint_xy == doctest::Approx(0.008));
  CHECK(p.lookahead_gain == doctest::Approx(before.lookahead_gain));
  CHECK(p.steering_lag == doctest::Approx(before.steering_lag));
}
