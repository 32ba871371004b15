#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "arbsr/image.hpp"
#include "doctest.h"
#include "testcorpus.hpp"

namespace test = testsupport;
namespace fs = std::filesystem;

namespace {

struct RunResult {
    int code = -1;
    std::string out, err;
};

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

/// Run a CLI invocation through the shell, capturing exit code and both
/// streams. Paths come from fresh_dir and contain no shell metacharacters.
RunResult run(const std::string& cmd) {
    static int counter = 0;
    static const fs::path cap = test::fresh_dir("clicap");
    fs::path out = cap / ("out" + std::to_string(counter));
    fs::path err = cap / ("err" + std::to_string(counter));
    ++counter;

    const std::string full = cmd + " >" + out.string() + " 2>" + err.string();
    const int status = std::system(full.c_str());
    RunResult r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out);
    r.err = slurp(err);
    return r;
}

const std::string kBin = ARBSR_BIN;
const std::string kBin64 = ARBSR64_BIN;

/// One tiny trained checkpoint + corpus shared by the read-only tests.
struct Fixture {
    fs::path dir;
    std::string corpus, ckpt;

    Fixture() {
        dir = test::fresh_dir("clifix");
        corpus = (dir / "corpus").string();
        test::write_corpus_dir(corpus, 4, 64, 64);
        ckpt = (dir / "model.ckpt").string();
        RunResult r = run(kBin + " train --data " + corpus + " --out " + ckpt +
                          " --epochs 1 --iters 2 --batch 2 --patch 16 --blocks 2" +
                          " --channels 8 --adapt-every 1 --experts 2 --hidden 8 --seed 3");
        REQUIRE(r.code == 0);
    }
};

Fixture& fixture() {
    static Fixture f;
    return f;
}

}  // namespace

TEST_CASE("usage errors exit with 2, help with 0") {
    CHECK(run(kBin).code == 2);                       // missing subcommand
    CHECK(run(kBin + " --help").code == 0);
    CHECK(run(kBin + " train").code == 2);            // missing --data
    CHECK(run(kBin + " sr --model x --input y --scale 2 --size 3x3").code == 2);
    CHECK(run(kBin + " frobnicate").code == 2);
}

TEST_CASE("train writes checkpoint and logs where asked") {
    Fixture& fx = fixture();
    CHECK(fs::exists(fx.ckpt));
    CHECK(fs::exists(fx.dir / "train_log.csv"));  // log dir defaults beside --out
    CHECK(fs::exists(fx.dir / "val_log.csv"));

    // a second run with the same seed must reproduce the loss stream exactly
    fs::path alt = test::fresh_dir("clitrain2");
    RunResult r = run(kBin + " train --data " + fx.corpus + " --out " +
                      (alt / "model.ckpt").string() +
                      " --epochs 1 --iters 2 --batch 2 --patch 16 --blocks 2" +
                      " --channels 8 --adapt-every 1 --experts 2 --hidden 8 --seed 3");
    REQUIRE(r.code == 0);
    CHECK(r.out.find("parameters") != std::string::npos);
    CHECK(slurp(alt / "train_log.csv") == slurp(fx.dir / "train_log.csv"));
    fs::remove_all(alt);
}

TEST_CASE("sr honors scale and exact-size targets") {
    Fixture& fx = fixture();
    fs::path dir = test::fresh_dir("clisr");
    std::string input = (dir / "in.png").string();
    arbsr::save_image(arbsr::tensor_to_image(test::synth_image(7, 40, 40)), input);

    std::string out1 = (dir / "up1.png").string();
    RunResult r = run(kBin + " sr --model " + fx.ckpt + " --input " + input +
                      " --output " + out1 + " --scale 2.7x1.5");
    REQUIRE(r.code == 0);
    arbsr::ImageBuffer img1 = arbsr::load_image(out1);
    CHECK(img1.width == 108);  // round(2.7 * 40)
    CHECK(img1.height == 60);  // round(1.5 * 40)

    std::string out2 = (dir / "up2.png").string();
    r = run(kBin + " sr --model " + fx.ckpt + " --input " + input + " --output " + out2 +
            " --size 53x87");
    REQUIRE(r.code == 0);
    arbsr::ImageBuffer img2 = arbsr::load_image(out2);
    CHECK(img2.width == 53);
    CHECK(img2.height == 87);

    // scale 1 is the identity size
    std::string out3 = (dir / "same.ppm").string();
    r = run(kBin + " sr --model " + fx.ckpt + " --input " + input + " --output " + out3 +
            " --scale 1");
    REQUIRE(r.code == 0);
    arbsr::ImageBuffer img3 = arbsr::load_image(out3);
    CHECK(img3.width == 40);
    CHECK(img3.height == 40);

    // out-of-range scale still runs but warns
    r = run(kBin + " sr --model " + fx.ckpt + " --input " + input + " --output " +
            (dir / "big.png").string() + " --scale 4.5");
    CHECK(r.code == 0);
    CHECK(r.err.find("outside the trained range") != std::string::npos);

    CHECK(run(kBin + " sr --model " + fx.ckpt + " --input " + input + " --scale abc").code ==
          2);
    CHECK(run(kBin + " sr --model " + fx.ckpt + " --input " + input + " --size 0x10").code ==
          2);
    CHECK(run(kBin + " sr --model " + fx.ckpt + " --input " + input + " --scale 2 --size 3x3")
              .code == 2);
    // runtime failure: unreadable input is a 1, not a usage error
    CHECK(run(kBin + " sr --model " + fx.ckpt + " --input " + (dir / "nope.png").string() +
              " --scale 2")
              .code == 1);
    fs::remove_all(dir);
}

TEST_CASE("eval reports the requested scales") {
    Fixture& fx = fixture();
    fs::path dir = test::fresh_dir("clieval");
    std::string report = (dir / "metrics.csv").string();
    RunResult r = run(kBin + " eval --model " + fx.ckpt + " --data " + fx.corpus +
                      " --scales 2,1.5x3.0 --report " + report);
    REQUIRE(r.code == 0);
    CHECK(r.out.find("scale 2: ") != std::string::npos);
    CHECK(r.out.find("scale 1.5x3: ") != std::string::npos);

    std::istringstream csv(slurp(report));
    std::string line;
    std::vector<std::string> lines;
    while (std::getline(csv, line)) lines.push_back(line);
    REQUIRE(lines.size() == 3);
    CHECK(lines[0] == "dataset,r_h,r_v,n,psnr,ssim");
    CHECK(lines[1].rfind("corpus,2,2,4,", 0) == 0);

    CHECK(run(kBin + " eval --model " + fx.ckpt + " --data " + fx.corpus +
              " --scales 2,bogus")
              .code == 2);
    fs::remove_all(dir);
}

TEST_CASE("gradcheck redirects to the 64-bit binary") {
    RunResult r = run(kBin + " gradcheck");
    CHECK(r.code == 1);
    CHECK(r.err.find("arbsr64") != std::string::npos);
}

TEST_CASE("dump-routing and dump-guidance write inspectable files") {
    Fixture& fx = fixture();
    fs::path dir = test::fresh_dir("clidump");
    std::string csvp = (dir / "routing.csv").string();
    RunResult r = run(kBin + " dump-routing --model " + fx.ckpt + " --out " + csvp);
    REQUIRE(r.code == 0);
    std::string csv = slurp(csvp);
    CHECK(csv.rfind("r_h,r_v,bank,expert,weight\n", 0) == 0);

    std::string img = (dir / "probe.png").string();
    arbsr::save_image(arbsr::tensor_to_image(test::synth_image(9, 48, 48)), img);
    r = run(kBin + " dump-guidance --model " + fx.ckpt + " --image " + img + " --scale 2" +
            " --out " + dir.string());
    REQUIRE(r.code == 0);
    CHECK(fs::exists(dir / "adapt0_guidance.pgm"));
    CHECK(fs::exists(dir / "adapt1_guidance.pgm"));
    fs::remove_all(dir);
}

TEST_CASE("analyze needs three same-architecture checkpoints") {
    Fixture& fx = fixture();
    fs::path dir = test::fresh_dir("clianalyze");
    std::string img = (dir / "probe.png").string();
    arbsr::save_image(arbsr::tensor_to_image(test::synth_image(10, 64, 64)), img);

    RunResult r = run(kBin + " analyze --models " + fx.ckpt + "," + fx.ckpt + "," + fx.ckpt +
                      " --image " + img + " --out " + dir.string());
    REQUIRE(r.code == 0);
    CHECK(fs::exists(dir / "similarity_block0.pgm"));

    // same weights at every scale -> agreement should be essentially 1
    CHECK(r.out.find("mean") != std::string::npos);

    std::string other = (dir / "wide.ckpt").string();
    RunResult t = run(kBin + " train --data " + fx.corpus + " --out " + other +
                      " --epochs 0 --blocks 2 --channels 16 --adapt-every 1 --experts 2" +
                      " --hidden 8");
    REQUIRE(t.code == 0);
    r = run(kBin + " analyze --models " + fx.ckpt + "," + fx.ckpt + "," + other +
            " --image " + img + " --out " + dir.string());
    CHECK(r.code == 2);
    CHECK(r.err.find("channels") != std::string::npos);
    fs::remove_all(dir);
}

TEST_CASE("ablate smoke run produces the summary table") {
    Fixture& fx = fixture();
    fs::path dir = test::fresh_dir("cliablate");
    RunResult r = run(kBin + " ablate --data " + fx.corpus + " --out " + dir.string() +
                      " --variants full --seeds 9 --epochs 1 --iters 1 --batch 1" +
                      " --patch 16 --blocks 1 --channels 8 --adapt-every 1 --experts 1" +
                      " --scales 2 --holdout 1");
    REQUIRE(r.code == 0);
    std::string csv = slurp(dir / "ablation.csv");
    CHECK(csv.find("full") != std::string::npos);
    fs::remove_all(dir);
}
