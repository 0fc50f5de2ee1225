#include <gtest/gtest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "sfl/experiment.hpp"

using namespace sfl;
namespace fs = std::filesystem;

namespace {

struct Proc {
    int code = -1;
    std::string out;
};

Proc run_cli(const std::string& args, const std::string& env = "") {
    const std::string cmd = env + " " + std::string(SFL_CLI_PATH) + " " + args + " 2>&1";
    Proc r;
    FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe) return r;
    char buf[4096];
    while (std::fgets(buf, sizeof buf, pipe)) r.out += buf;
    const int status = pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

fs::path scratch(const std::string& name) {
    auto dir = fs::temp_directory_path() / ("sfl_cli_" + name + "_" + std::to_string(::getpid()));
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

const std::string kGround = std::string(SFL_SOURCE_DIR) + "/configs/ground.cfg";

}  // namespace

TEST(GitBlobHash, KnownObjectIds) {
    EXPECT_EQ(git_blob_hash(""), "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
    EXPECT_EQ(git_blob_hash("hello\n"), "ce013625030ba8dba906f756967f9e9ca394464a");
}

TEST(Config, ParsesAllSections) {
    const auto cfg = parse_experiment_config(
        "experiment = levels\nseed = 7\ndim = 3\np = 3\nbox_l = 8\nspacing_h = 0.5\n"
        "w_family = exponential\nw_c = 0.2\nw_a = 1\ny_sweep = 3, 5\nagreement_rel = 0.05\n");
    EXPECT_EQ(cfg.experiment, "levels");
    EXPECT_EQ(cfg.seed, 7u);
    EXPECT_EQ(cfg.problem.dim, 3);
    EXPECT_EQ(cfg.problem.w.family, WFamily::exponential);
    EXPECT_EQ(cfg.tol.y_sweep, (std::vector<double>{3.0, 5.0}));
    EXPECT_DOUBLE_EQ(cfg.tol.agreement_rel, 0.05);
}

TEST(Config, ErrorsCarryLineAndColumn) {
    auto expect_at = [](const std::string& text, int line, int col) {
        try {
            parse_experiment_config(text, "cfg");
            ADD_FAILURE() << "accepted: " << text;
        } catch (const ParseError& e) {
            EXPECT_EQ(e.line(), line) << e.what();
            EXPECT_EQ(e.column(), col) << e.what();
        }
    };
    expect_at("dim = 2\nbogus = 1\n", 2, 1);
    expect_at("dim = 2\n\np = four\n", 3, 5);
    expect_at("experiment = dance\n", 1, 14);
    expect_at("dim = 2\n  no equals here\n", 2, 3);
    expect_at("seed = -3\n", 1, 8);
    expect_at("dim = 2\ndim = 3\n", 2, 1);
    expect_at("y_sweep = 4, x\n", 1, 13);
}

TEST(Config, InvalidProblemIsRejected) {
    EXPECT_THROW(parse_experiment_config("dim = 1\n"), InvalidSpec);
    EXPECT_THROW(parse_experiment_config("theta_samples = 10\n"), InvalidSpec);
    EXPECT_THROW(parse_experiment_config("box_l = 1\nspacing_h = 0.3\n"), InvalidSpec);
}

TEST(Config, OverridesReplaceAndAppend) {
    const auto cfg = load_experiment_config(kGround, {"box_l=10", "seed = 9"});
    EXPECT_DOUBLE_EQ(cfg.problem.box_l, 10.0);
    EXPECT_EQ(cfg.seed, 9u);
    try {
        load_experiment_config(kGround, {"box_l=10", "nonsense"});
        ADD_FAILURE();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 2);
        EXPECT_NE(std::string(e.what()).find("--override"), std::string::npos);
    }
    EXPECT_THROW(load_experiment_config(kGround, {"typo_key=1"}), ParseError);
}

TEST(Config, CanonicalFormIgnoresOutputDirectory) {
    auto a = parse_experiment_config("seed = 2\n");
    auto b = a;
    b.out_dir = "elsewhere";
    EXPECT_EQ(canonical_config(a).dump(), canonical_config(b).dump());
    b.seed = 3;
    EXPECT_NE(canonical_config(a).dump(), canonical_config(b).dump());
}

TEST(Report, HashIgnoresTimestampAndTracksContent) {
    Report r;
    r.level("x", 1.5, "op");
    r.check("ok", true, 0.1, "fine");
    EXPECT_THROW(r.check("ok", true, 0.1, "again"), Error);
    const auto dir = scratch("report");
    const auto h1 = r.write(dir);
    EXPECT_EQ(h1, r.hash());
    EXPECT_EQ(slurp(dir / "report.hash"), h1 + "\n");
    const auto j = json::parse(slurp(dir / "report.json"));
    EXPECT_EQ(j["report_hash"], h1);
    EXPECT_TRUE(j.contains("timestamp"));
    r.level("x", 1.5000000000000002, "op");
    EXPECT_NE(r.hash(), h1);
    fs::remove_all(dir);
}

TEST(Cli, GroundRunWritesArtifacts) {
    const auto dir = scratch("ground");
    const auto r = run_cli("run " + kGround + " --out " + dir.string());
    ASSERT_EQ(r.code, 0) << r.out;
    for (const char* f : {"report.json", "report.hash", "profile.csv", "ground_state.csv"}) {
        EXPECT_TRUE(fs::exists(dir / f)) << f;
    }
    for (const auto& e : fs::directory_iterator(dir)) {
        EXPECT_EQ(e.path().string().find(".tmp"), std::string::npos) << e.path();
    }
    const auto j = json::parse(slurp(dir / "report.json"));
    EXPECT_EQ(j["verdicts"]["ground_state_agreement"]["status"], "pass");
    EXPECT_EQ(j["verdicts"]["decay_rate"]["status"], "pass");
    EXPECT_EQ(j["levels"]["lambda1_inf"]["operation"], "minimize_lambda1");
    EXPECT_NE(r.out.find("pass  ground_state_agreement"), std::string::npos);
    fs::remove_all(dir);
}

TEST(Cli, MalformedConfigExitsWithOne) {
    const auto dir = scratch("bad");
    std::ofstream(dir / "bad.cfg") << "dim = 2\np = 4\nspacing_h = zero\n";
    const auto r = run_cli("run " + (dir / "bad.cfg").string() + " --out " + (dir / "o").string());
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.out.find("bad.cfg:3:13"), std::string::npos) << r.out;
    EXPECT_FALSE(fs::exists(dir / "o" / "report.json"));
    EXPECT_EQ(run_cli("run " + (dir / "missing.cfg").string()).code, 1);
    EXPECT_EQ(run_cli("frobnicate").code, 1);
    fs::remove_all(dir);
}

TEST(Cli, FailedVerdictExitsWithTwo) {
    const auto dir = scratch("strict");
    const auto r = run_cli("run " + kGround + " --out " + dir.string() + " --override agreement_rel=1e-9");
    EXPECT_EQ(r.code, 2) << r.out;
    EXPECT_NE(r.out.find("fail  ground_state_agreement"), std::string::npos) << r.out;
    EXPECT_TRUE(fs::exists(dir / "report.json"));
    fs::remove_all(dir);
}

TEST(Cli, HashIndependentOfThreadCount) {
    const auto a = scratch("t1");
    const auto b = scratch("t4");
    const auto c = scratch("env");
    ASSERT_EQ(run_cli("run " + kGround + " --out " + a.string() + " --threads 1").code, 0);
    ASSERT_EQ(run_cli("run " + kGround + " --out " + b.string() + " --threads 4").code, 0);
    ASSERT_EQ(run_cli("run " + kGround + " --out " + c.string(), "SFL_THREADS=3").code, 0);
    const auto h = slurp(a / "report.hash");
    EXPECT_EQ(h.size(), 41u);
    EXPECT_EQ(slurp(b / "report.hash"), h);
    EXPECT_EQ(slurp(c / "report.hash"), h);
    const auto d = scratch("seed");
    ASSERT_EQ(run_cli("run " + kGround + " --out " + d.string() + " --seed 5").code, 0);
    EXPECT_NE(slurp(d / "report.hash"), h);
    for (const auto& dir : {a, b, c, d}) fs::remove_all(dir);
}
