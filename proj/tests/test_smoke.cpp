#include <catch2/catch_amalgamated.hpp>

#include <numeric>

#include "dtcd/trainer.hpp"
#include "support/fixtures.hpp"

using namespace dtcd;
using namespace dtcd::testing;

// 500 steps for each of the six presets; batch 4 keeps the whole case within a few minutes.
TEST_CASE("total loss moving average falls over 500 steps for every preset", "[smoke][slow]") {
  const SyntheticData data(overfit_options(), {1.0, 0.0, 0.0});
  auto window_mean = [](const std::vector<StepRecord>& s, std::size_t end) {
    double sum = 0;
    for (std::size_t i = end - 50; i < end; ++i) sum += s[i].loss.total;
    return sum / 50;
  };
  for (auto preset : kAblationOrder) {
    TrainConfig c = tiny_config(preset);
    c.batch = 4;
    c.max_steps = 500;
    const TrainResult r = train(c, data.source, data.manifest);
    REQUIRE(r.history.steps.size() == 500);
    const double early = window_mean(r.history.steps, 50), late = window_mean(r.history.steps, 500);
    INFO(to_string(preset) << ": mean loss steps 1-50 " << early << ", steps 451-500 " << late);
    CHECK(late < early);
  }
}
