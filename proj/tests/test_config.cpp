#include <doctest.h>

#include "singlab/config.hpp"
#include "singlab/errors.hpp"

using namespace singlab;
using nlohmann::json;

TEST_SUITE("config") {
  TEST_CASE("defaults") {
    const ExperimentConfig c = config_from_json(json::object());
    CHECK(c.spec.family == Family::binomial);
    CHECK(c.spec.trials == 3);
    CHECK(c.replicates == 50);
    CHECK(c.n_grid == std::vector<std::int64_t>{100, 200, 400, 800, 1600});
    CHECK(c.regions().bstar == 0.5);
    CHECK_NOTHROW(c.validate());
  }

  TEST_CASE("round trip") {
    const json j = json::parse(R"({"family":"binomial","K":2,"M":5,"prior":{"eta1":0.25},
      "truth":{"weights":[0.3,0.7],"comps":[0.2,0.8]},"n_grid":[10,20,40,80],"R":7,"master_seed":11,
      "engine":"quad","quad":{"tol":1e-5},"regions":{"delta_a":0.05,"delta_b":0.2},"threads":2})");
    const ExperimentConfig c = config_from_json(j);
    CHECK(c.spec.trials == 5);
    CHECK(c.spec.prior.eta1 == 0.25);
    CHECK(c.truth.comps == std::vector<double>{0.2, 0.8});
    CHECK(c.engine == Engine::quad);
    CHECK(c.quad.tol == 1e-5);
    CHECK(c.regions().delta_a == 0.05);
    const json back = config_to_json(c);
    CHECK(config_to_json(config_from_json(back)) == back);
  }

  TEST_CASE("rejections") {
    CHECK_THROWS_AS(config_from_json(json{{"etaa", 1}}), ConfigError);
    CHECK_THROWS_AS(config_from_json(json{{"engine", "mcmc"}}), Error);
    ExperimentConfig c = config_from_json(json::object());
    c.replicates = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = config_from_json(json::object());
    c.n_grid = {100, 50};
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = config_from_json(json::object());
    c.spec.prior.eta1 = -1;
    CHECK_THROWS_AS(c.validate(), ConfigError);
  }

  TEST_CASE("chain seeds come from the master seed") {
    ExperimentConfig a = config_from_json(json::object());
    ExperimentConfig b = a;
    b.task = 1;
    CHECK(a.chain_settings().seed != b.chain_settings().seed);
    b.task = 0;
    CHECK(a.chain_settings().seed == b.chain_settings().seed);
  }
}
