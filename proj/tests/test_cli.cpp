#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <gtest/gtest.h>

namespace fs = std::filesystem;

namespace {

const fs::path kDir = fs::temp_directory_path() / "tsrp_cli_test";

int run(const std::string& args) {
  const std::string cmd = std::string(TSRP_CLI_PATH) + " " + args + " >" + (kDir / "last.log").string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    fs::remove_all(kDir);
    fs::create_directories(kDir);
    write(kDir / "quick.cfg", "epochs = 1\ntrain_stride = 24\nval_stride = 48\ntest_stride = 12\n");
  }
  static void TearDownTestSuite() { fs::remove_all(kDir); }
};

}  // namespace

TEST_F(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(run(""), 2);
  EXPECT_EQ(run("frobnicate"), 2);
  EXPECT_EQ(run("experiment --out " + kDir.string()), 2);
  EXPECT_EQ(run("train --horizon twelve"), 2);
  EXPECT_EQ(run("eval"), 2);
}

TEST_F(Cli, ErrorKindsMapToExitCodes) {
  write(kDir / "bad.cfg", "protocol = short\nepochs = many\n");
  EXPECT_EQ(run("experiment --config " + (kDir / "bad.cfg").string()), 3);
  write(kDir / "dup.cfg", "epochs = 1\nepochs = 2\n");
  EXPECT_EQ(run("experiment --config " + (kDir / "dup.cfg").string()), 5);

  const fs::path data = kDir / "broken";
  fs::create_directories(data);
  write(data / "manifest.csv", "plant_id,capacity_mw,lon,lat\nA,10,0,0\n");
  write(data / "A.csv", "timestamp,power_mw\n2006-01-01T00:00:00,oops\n");
  EXPECT_EQ(run("prep --data " + data.string() + " --out " + (kDir / "prep").string()), 5);
  write(data / "A.csv", "timestamp,power_mw\n2006-01-01T00:00:00,1\n2006-01-01T00:00:00,1\n");
  EXPECT_EQ(run("prep --data " + data.string() + " --out " + (kDir / "prep").string()), 4);

  write(kDir / "junk.tsrp", "not a checkpoint");
  EXPECT_EQ(run("eval --checkpoint " + (kDir / "junk.tsrp").string() + " --plant A"), 6);
}

TEST_F(Cli, SynthTrainEvalSummarize) {
  const std::string data = (kDir / "fixture").string();
  ASSERT_EQ(run("synth --days 6 --out " + data), 0);
  EXPECT_TRUE(fs::exists(kDir / "fixture" / "manifest.csv"));
  ASSERT_EQ(run("prep --data " + data + " --plant B --out " + (kDir / "prep").string()), 0);
  EXPECT_TRUE(fs::exists(kDir / "prep" / "B_clean.csv"));

  const std::string cfg = (kDir / "quick.cfg").string();
  const std::string model = (kDir / "model").string();
  ASSERT_EQ(run("train --plant A --horizon 12 --config " + cfg + " --data " + data + " --out " + model), 0);
  EXPECT_TRUE(fs::exists(kDir / "model" / "model.tsrp"));
  EXPECT_TRUE(fs::exists(kDir / "model" / "history.csv"));

  const std::string ev = (kDir / "eval").string();
  ASSERT_EQ(run("eval --checkpoint " + model + "/model.tsrp --plant C --config " + cfg + " --data " + data +
                " --out " + ev),
            0);
  ASSERT_TRUE(fs::exists(kDir / "eval" / "report.csv"));
  EXPECT_EQ(run("summarize --report " + ev + "/report.csv --out " + ev), 0);
  EXPECT_TRUE(fs::exists(kDir / "eval" / "summary.csv"));

  const std::string exp = (kDir / "exp").string();
  EXPECT_EQ(run("experiment --protocol zeroshot --horizon 12 --input-len 24 --source A --target B --model persistence "
                "--seed 0 --config " + cfg + " --data " + data + " --out " + exp),
            0);
  EXPECT_TRUE(fs::exists(kDir / "exp" / "report.csv"));
  EXPECT_TRUE(fs::exists(kDir / "exp" / "traces" / "zeroshot_persistence_A-to-B_h12_s0.csv"));
  EXPECT_EQ(run("experiment --protocol zeroshot --source A --config " + cfg + " --out " + exp), 2);
}
