#include <cstdio>
#include <fstream>
#include <sys/wait.h>

#include <gtest/gtest.h>
#include <json.hpp>

#include "harmonic/datasets.hpp"
#include "oracles.hpp"

using namespace harmonic;
using harmonic::testing::TempDir;
using json = nlohmann::json;

namespace {

struct Run {
    int code = -1;
    std::string out;
};

Run cli(const std::string& args) {
    const std::string cmd = std::string(HARMONIC_CLI_PATH) + " " + args + " 2>/dev/null";
    Run r;
    FILE* pipe = ::popen(cmd.c_str(), "r");
    if (pipe == nullptr) {
        return r;
    }
    char buf[4096];
    std::size_t n = 0;
    while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) {
        r.out.append(buf, n);
    }
    const int status = ::pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::size_t count_pgm(const std::filesystem::path& dir) {
    std::size_t n = 0;
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
        n += e.path().extension() == ".pgm";
    }
    return n;
}

// Tiny MNIST-format train and test files under <root>/mnist.
void write_tiny_mnist(const std::filesystem::path& root) {
    std::filesystem::create_directories(root / "mnist");
    Rng rng(3);
    for (const char* split : {"train", "t10k"}) {
        RawImages raw;
        raw.rows = 28;
        raw.cols = 28;
        for (int i = 0; i < 40; ++i) {
            raw.labels.push_back(i % 10);
            for (int p = 0; p < 784; ++p) {
                const bool bar = p / 28 / 3 == i % 10;
                raw.pixels.push_back(static_cast<std::uint8_t>((bar ? 180 : 0) + rng.below(60)));
            }
        }
        const std::string s(split);
        write_mnist_idx(raw, root / "mnist" / (s + "-images-idx3-ubyte"),
                        root / "mnist" / (s + "-labels-idx1-ubyte"));
    }
}

} // namespace

TEST(Cli, FiltersCounts) {
    TempDir a("cli_f1"), b("cli_f2");
    EXPECT_EQ(cli("filters --size 3 --lambda 2 --out " + a.path().string()).code, 0);
    EXPECT_EQ(count_pgm(a.path()), 3u);
    EXPECT_EQ(cli("filters --size 3 --out " + b.path().string()).code, 0);
    EXPECT_EQ(count_pgm(b.path()), 9u);
    EXPECT_TRUE(std::filesystem::exists(b / "psi.csv"));
}

TEST(Cli, UsageErrors) {
    TempDir d("cli_usage");
    EXPECT_EQ(cli("filters --size 0 --out " + d.path().string()).code, 2);
    EXPECT_EQ(cli("filters --size 3 --bogus --out " + d.path().string()).code, 2);
    EXPECT_EQ(cli("").code, 2);
    EXPECT_EQ(cli("train --override epochs=0").code, 2);
    EXPECT_EQ(cli("bench --alg 3").code, 2);
}

TEST(Cli, HelpForEveryCommand) {
    for (const char* c : {"filters", "verify", "train", "eval", "table2", "stridesweep", "bench",
                          "compute-stats"}) {
        const auto r = cli(std::string(c) + " --help");
        EXPECT_EQ(r.code, 0) << c;
        EXPECT_NE(r.out.find("Usage"), std::string::npos) << c;
    }
}

TEST(Cli, IoErrors) {
    EXPECT_EQ(cli("eval --checkpoint /nonexistent/x.ckpt --data /nonexistent").code, 3);
    EXPECT_EQ(cli("train --config /nonexistent/cfg").code, 3);
    EXPECT_EQ(cli("compute-stats --dataset mnist --data /nonexistent").code, 3);
}

TEST(Cli, VerifyPassesAndFailsOnUnattainableTolerance) {
    const auto ok = cli("verify --max-n 8 --configs 10 --skip-model --json");
    EXPECT_EQ(ok.code, 0);
    const auto j = json::parse(ok.out);
    EXPECT_TRUE(j["passed"].get<bool>());
    EXPECT_GT(j["suites"].size(), 5u);
    const auto bad = cli("verify --max-n 8 --configs 10 --skip-model --tol 1e-30");
    EXPECT_EQ(bad.code, 1);
    EXPECT_NE(bad.out.find("FAIL"), std::string::npos);
}

TEST(Cli, BenchReportsLowerPeakForFolded) {
    const auto r = cli("bench --alg 1,2 --n 64 --m 64 --k 3 --hw 32,32 --batch 2 --reps 1 --json");
    ASSERT_EQ(r.code, 0);
    const auto j = json::parse(r.out);
    ASSERT_EQ(j["results"].size(), 2u);
    const auto& a1 = j["results"][0];
    const auto& a2 = j["results"][1];
    EXPECT_EQ(a1["overhead_ratio"], "9/64");
    EXPECT_EQ(a2["overhead_ratio"], "9/1024");
    EXPECT_GT(a1["peak_intermediate_elems"].get<std::uint64_t>(),
              a2["peak_intermediate_elems"].get<std::uint64_t>());
    EXPECT_EQ(a1["measured_peak_elems"], a1["peak_intermediate_elems"]);
    EXPECT_EQ(a2["measured_peak_elems"], a2["peak_intermediate_elems"]);
}

TEST(Cli, TrainThenEvalReproducesTestError) {
    TempDir d("cli_train");
    write_tiny_mnist(d.path());
    std::ofstream(d / "run.cfg") << "model=harmonic\nepochs=2\nbatch_size=10\ntrain_size=20\n"
                                    "lr=0.5\n";
    const std::string common = "train --config " + (d / "run.cfg").string() +
                               " --override data_dir=" + d.path().string() +
                               " --override checkpoint_path=" + (d / "m.ckpt").string();
    const auto t = cli(common + " --override lr=0.05 --json");
    ASSERT_EQ(t.code, 0) << t.out;
    const auto tj = json::parse(t.out);
    const auto e = cli("eval --json --checkpoint " + (d / "m.ckpt").string() + " --data " +
                       d.path().string());
    ASSERT_EQ(e.code, 0);
    const auto ej = json::parse(e.out);
    EXPECT_EQ(ej["test_err"].get<double>(), tj["final_test_err"].get<double>());
    // metrics CSV is byte-identical across repeated runs
    const auto m1 = cli(common + " --override metrics_path=" + (d / "a.csv").string());
    const auto m2 = cli(common + " --override metrics_path=" + (d / "b.csv").string());
    ASSERT_EQ(m1.code, 0);
    ASSERT_EQ(m2.code, 0);
    std::ifstream fa(d / "a.csv"), fb(d / "b.csv");
    const std::string sa((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
    const std::string sb((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
    EXPECT_FALSE(sa.empty());
    EXPECT_EQ(sa, sb);
}

TEST(Cli, Table2SummaryRow) {
    TempDir d("cli_t2");
    write_tiny_mnist(d.path());
    const auto r = cli("table2 --sizes 20 --variants harmonic --seeds 3 --override epochs=1 "
                       "--override batch_size=10 --override data_dir=" + d.path().string() +
                       " --summary-csv " + (d / "s.csv").string() + " --runs-csv " +
                       (d / "r.csv").string());
    ASSERT_EQ(r.code, 0) << r.out;
    std::ifstream s(d / "s.csv");
    std::string header, row, extra;
    std::getline(s, header);
    std::getline(s, row);
    EXPECT_EQ(header, "size,variant,seeds,median_test_err");
    EXPECT_EQ(row.rfind("20,harmonic,3,", 0), 0u);
    EXPECT_FALSE(std::getline(s, extra) && !extra.empty());
}
