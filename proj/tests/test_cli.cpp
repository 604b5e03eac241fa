// Exercises the installed CLI binary end to end; the binary path arrives as
// argv[1] from CTest.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

namespace fs = std::filesystem;

namespace {

int failures = 0;

void check(bool ok, const std::string& what) {
  if (ok) {
    std::cout << "ok: " << what << '\n';
  } else {
    ++failures;
    std::cout << "FAILED: " << what << '\n';
  }
}

int run(const std::string& cmd) {
  int rc = std::system(cmd.c_str());
  if (rc == -1) return -1;
  return WEXITSTATUS(rc);
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: cli_tests <path-to-ovprobe>\n";
    return 2;
  }
  std::string bin = argv[1];
  fs::path work = fs::current_path() / "tmp_cli";
  fs::remove_all(work);
  fs::create_directories(work);

  fs::path cfg = work / "cfg.json";
  std::ofstream(cfg) << R"({
    "seed": 3,
    "k": 30,
    "out": ")" << (work / "out").string() << R"(",
    "synth": {"n_train_images": 50, "n_test_images": 25}
  })";

  std::string quiet = " > /dev/null 2>&1";

  check(run(bin + " synth --config " + cfg.string() + " --out " + (work / "data").string() + quiet) == 0,
        "synth exits 0");
  check(fs::exists(work / "data" / "manifest.json"), "synth writes a manifest");

  check(run(bin + " run-all --config " + cfg.string() + quiet) == 0, "run-all exits 0");
  check(fs::exists(work / "out" / "report.json"), "run-all writes report.json");
  check(fs::exists(work / "out" / "detections.jsonl"), "run-all writes detections");
  check(fs::exists(work / "out" / "base_head.ovhd") && fs::exists(work / "out" / "novel_head.ovhd"),
        "run-all writes both head checkpoints");

  // probe without a retrieve stage: missing pseudo labels is a runtime error
  fs::path fresh = work / "fresh";
  check(run(bin + " probe --config " + cfg.string() + " --out " + fresh.string() + quiet) == 1,
        "probe before retrieve exits 1");

  check(run(bin + " sweep --config " + cfg.string() + " --param k --values 5,10,20,50,100" + quiet) == 0,
        "sweep exits 0");
  {
    std::ifstream csv(work / "out" / "sweep.csv");
    std::string line;
    int rows = -1;  // discount header
    while (std::getline(csv, line))
      if (!line.empty()) ++rows;
    check(rows == 5, "sweep CSV has one row per value");
  }

  check(run(bin + " ablate --config " + cfg.string() + quiet) == 0, "ablate exits 0");
  check(fs::exists(work / "out" / "ablation.csv"), "ablate writes ablation.csv");

  // flag and config errors exit 2
  check(run(bin + " frobnicate" + quiet) == 2, "unknown subcommand exits 2");
  check(run(bin + " run-all --config missing.json" + quiet) == 1, "missing config file exits 1");
  fs::path bad = work / "bad.json";
  std::ofstream(bad) << R"({"beta": 1.5})";
  check(run(bin + " run-all --config " + bad.string() + quiet) == 2, "out-of-range beta exits 2");

  // eval consumes what infer wrote
  check(run(bin + " eval --config " + cfg.string() + quiet) == 0, "eval re-runs from artifacts");

  // --seed overrides the config seed
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  };
  check(run(bin + " synth --config " + cfg.string() + " --out " + (work / "s3").string() + quiet) == 0 &&
            run(bin + " synth --config " + cfg.string() + " --seed 99 --out " + (work / "s99").string() + quiet) == 0,
        "synth with explicit seed exits 0");
  check(slurp(work / "s3" / "proposals.ovpf") == slurp(work / "data" / "proposals.ovpf"),
        "same seed reproduces the dataset");
  check(slurp(work / "s99" / "proposals.ovpf") != slurp(work / "data" / "proposals.ovpf"),
        "seed override changes the dataset");

  fs::remove_all(work);
  if (failures) {
    std::cout << failures << " CLI check(s) failed\n";
    return 1;
  }
  std::cout << "all CLI checks passed\n";
  return 0;
}
