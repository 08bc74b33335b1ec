#include <cstdio>

#include "grab/eval/eval.hpp"

namespace grab::eval {

nlohmann::ordered_json EvalReport::ToJson(bool include_timing) const {
  nlohmann::ordered_json j;
  j["scenario"] = scenario;
  j["seed"] = seed;
  j["trials"] = trials;
  j["successes"] = successes;
  j["success_rate"] = success_rate();
  j["tolerance"] = tolerance;
  j["bar_met"] = bar_met;
  j["params"] = params;
  j["metrics"] = metrics;
  j["per_trial"] = per_trial;
  if (include_timing) j["wall_clock_s"] = wall_clock_s;
  return j;
}

std::string EvalReport::Summary() const {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%s: %zu/%zu trials succeeded (%.1f%%), seed %llu, %.2f s -> %s",
                scenario.c_str(), successes, trials, 100.0 * success_rate(),
                static_cast<unsigned long long>(seed), wall_clock_s, bar_met ? "PASS" : "FAIL");
  return buf;
}

}  // namespace grab::eval
