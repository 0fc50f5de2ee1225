#include <cstdio>
#include <exception>
#include <string>
#include <utility>
#include <vector>

#include "sfl/experiment.hpp"
#include "sfl/parallel.hpp"

namespace {

const std::vector<std::pair<std::string, std::string>> kCriteria{
    {"A1", "two_bump_sandwich"},        {"A2", "ground_state_agreement"},
    {"A3", "decay_rate"},               {"A4", "disjoint_support_closed_form"},
    {"A5", "penalty_scenario"},         {"A6", "odd_sphere_map"},
    {"A7", "symmetry_breaking"},        {"A8", "potential_deviation_bound"},
    {"A9", "overlap_decay_rates"},      {"A10", "balanced_point_bound"},
    {"A11", "gradient_check"},
};

}  // namespace

int main(int argc, char** argv) {
    const std::string config = argc > 1 ? argv[1] : std::string(SFL_SOURCE_DIR) + "/configs/acceptance.cfg";
    try {
        auto cfg = sfl::load_experiment_config(config);
        cfg.out_dir = "acceptance_run1";
        const auto first = sfl::run(cfg);
        sfl::set_thread_count(sfl::thread_count() > 1 ? 1 : 2);
        cfg.out_dir = "acceptance_run2";
        const auto second = sfl::run(cfg);

        int failures = 0;
        for (const auto& [label, id] : kCriteria) {
            const auto* v = first.report.find(id);
            const bool ok = v && v->status == sfl::Status::pass;
            failures += !ok;
            std::printf("%-4s %-30s %s  %s\n", label.c_str(), id.c_str(), ok ? "PASS" : "FAIL",
                        v ? v->detail.c_str() : "verdict missing");
        }
        const bool same = first.hash == second.hash;
        failures += !same;
        std::printf("%-4s %-30s %s  %s vs %s\n", "A12", "reproducible_hash", same ? "PASS" : "FAIL",
                    first.hash.c_str(), second.hash.c_str());
        for (const auto& v : first.report.verdicts) {
            bool listed = false;
            for (const auto& c : kCriteria) listed = listed || c.second == v.id;
            if (!listed) std::printf("     %-30s %s  %s\n", v.id.c_str(), sfl::to_string(v.status), v.detail.c_str());
        }
        std::printf("%d of %zu criteria failed\n", failures, kCriteria.size() + 1);
        return failures == 0 ? 0 : 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
