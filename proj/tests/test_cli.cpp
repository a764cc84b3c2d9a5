#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cli.hpp"
#include "duckling/evaluation.hpp"

namespace fs = std::filesystem;
using duckling::cli::run;

namespace {

std::string read(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write(const fs::path& p, const std::string& s) { std::ofstream(p, std::ios::binary) << s; }

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("duckling_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  int call(std::vector<std::string> args) {
    out_.str("");
    err_.str("");
    return run(args, out_, err_);
  }

  // small synthetic cohort plus its scores file
  void make_cohort() {
    write(path("synth.json"), "{\"n_patients\": 24}");
    ASSERT_EQ(call({"synth", "--config", path("synth.json"), "--out", path("cohort.csv")}), 0) << err_.str();
    ASSERT_EQ(call({"score", "--input", path("cohort.csv"), "--output", path("scores.csv")}), 0)
        << err_.str();
  }

  fs::path dir_;
  std::ostringstream out_, err_;
};

const char* kHeader = "patient_id,region,lesion_id,label,f0,f1\n";

}  // namespace

TEST(FoldPath, InsertsFoldBeforeExtension) {
  EXPECT_EQ(duckling::cli::fold_path("out/model.json", 2), "out/model.fold2.json");
  EXPECT_EQ(duckling::cli::fold_path("history", 0), "history.fold0");
}

TEST_F(Cli, ValidateExitCodes) {
  write(path("ok.csv"), std::string(kHeader) + "p,torso,a,1,1,2\np,torso,b,0,2,1\n");
  EXPECT_EQ(call({"validate", "--input", path("ok.csv")}), 0);
  EXPECT_NE(out_.str().find("records: 2"), std::string::npos);

  write(path("bad.csv"), std::string(kHeader) + "p,torso,a,1,1,2\np,torso,b,0,2,1,3\n");
  EXPECT_EQ(call({"validate", "--input", path("bad.csv")}), 1);
  EXPECT_NE(err_.str().find("inconsistent dimension at row 2"), std::string::npos) << err_.str();

  EXPECT_EQ(call({"validate", "--input", path("missing.csv")}), 2);
  EXPECT_EQ(call({"validate"}), 1);
  EXPECT_EQ(call({"frobnicate"}), 1);
  EXPECT_EQ(call({"--help"}), 0);
}

TEST_F(Cli, ScoreDuplicatesAndFallback) {
  std::string text = kHeader;
  for (int i = 0; i < 6; ++i) text += "dup,torso,d" + std::to_string(i) + ",,1,1\n";
  for (int i = 0; i < 5; ++i) text += "few,torso,f" + std::to_string(i) + ",,1," + std::to_string(i) + "\n";
  write(path("in.csv"), text);
  const auto before = read(path("in.csv"));
  ASSERT_EQ(call({"score", "--input", path("in.csv"), "--output", path("s.csv")}), 0) << err_.str();
  EXPECT_EQ(read(path("in.csv")), before);

  std::istringstream rows(read(path("s.csv")));
  std::string line;
  std::getline(rows, line);
  EXPECT_EQ(line, "patient_id,region,lesion_id,outlier_score,flag,fallback");
  int n = 0;
  while (std::getline(rows, line)) {
    if (line.rfind("dup,", 0) == 0) {
      const auto score_at = line.find(',', line.find(',', line.find(',') + 1) + 1) + 1;
      EXPECT_LE(std::stod(line.substr(score_at)), 1e-9) << line;
      EXPECT_NE(line.find(",normal,0"), std::string::npos) << line;
    }
    if (line.rfind("few,", 0) == 0) EXPECT_NE(line.find(",1,na,1"), std::string::npos) << line;
    ++n;
  }
  EXPECT_EQ(n, 11);
}

TEST_F(Cli, ScoreZeroNormIsComputationError) {
  std::string text = kHeader;
  for (int i = 0; i < 6; ++i) text += "p,torso,l" + std::to_string(i) + ",,1,1\n";
  text += "p,torso,zero,,0,0\n";
  write(path("in.csv"), text);
  EXPECT_EQ(call({"score", "--input", path("in.csv"), "--output", path("s.csv")}), 3);
  EXPECT_NE(err_.str().find("zero"), std::string::npos) << err_.str();
}

TEST_F(Cli, ScoreWritesHeatmaps) {
  make_cohort();
  ASSERT_EQ(call({"score", "--input", path("cohort.csv"), "--output", path("s.csv"), "--heatmap-dir",
                  path("maps")}),
            0);
  std::size_t pgm = 0;
  for (const auto& e : fs::directory_iterator(path("maps"))) {
    if (e.path().extension() == ".pgm") {
      ++pgm;
      EXPECT_EQ(read(e.path()).rfind("P2\n", 0), 0u);
    }
  }
  EXPECT_GT(pgm, 0u);
}

TEST_F(Cli, TrainZeroEpochsAndDeterminism) {
  make_cohort();
  write(path("cfg.json"), "{\"epochs\": 0, \"d_f\": 8, \"d_h\": 4}");
  ASSERT_EQ(call({"train", "--input", path("cohort.csv"), "--scores", path("scores.csv"), "--folds", "3",
                  "--config", path("cfg.json"), "--out-model", path("m.json")}),
            0)
      << err_.str();
  auto ckpt = nlohmann::json::parse(read(path("m.fold0.json")));
  EXPECT_EQ(ckpt["optimizer"]["step"].get<int>(), 0);

  write(path("cfg.json"), "{\"epochs\": 3, \"d_f\": 8, \"d_h\": 4}");
  for (const char* tag : {"a", "b"}) {
    ASSERT_EQ(call({"train", "--input", path("cohort.csv"), "--scores", path("scores.csv"), "--folds", "3",
                    "--seed", "5", "--config", path("cfg.json"), "--out-model", path(std::string(tag) + ".json"),
                    "--out-history", path(std::string(tag) + ".hist.csv"), "--out-report",
                    path(std::string(tag) + ".report.json")}),
              0);
  }
  for (int f = 0; f < 3; ++f) {
    const std::string s = ".fold" + std::to_string(f);
    EXPECT_EQ(read(path("a" + s + ".json")), read(path("b" + s + ".json")));
    EXPECT_EQ(read(path("a.hist" + s + ".csv")), read(path("b.hist" + s + ".csv")));
  }
  EXPECT_EQ(read(path("a.report.json")), read(path("b.report.json")));
  EXPECT_TRUE(nlohmann::json::parse(read(path("a.report.json"))).contains("auc"));

  EXPECT_EQ(call({"train", "--input", path("cohort.csv"), "--scores", path("scores.csv"), "--ablation",
                  "sideways"}),
            1);
}

TEST_F(Cli, EvalReportAndDimensionMismatch) {
  make_cohort();
  write(path("cfg.json"), "{\"epochs\": 2, \"d_f\": 8, \"d_h\": 4}");
  ASSERT_EQ(call({"train", "--input", path("cohort.csv"), "--scores", path("scores.csv"), "--folds", "2",
                  "--config", path("cfg.json"), "--out-model", path("m.json")}),
            0);
  ASSERT_EQ(call({"eval", "--model", path("m.fold0.json"), "--input", path("cohort.csv"), "--scores",
                  path("scores.csv"), "--out-report", path("r.json"), "--out-roc", path("roc.csv"),
                  "--out-predictions", path("p.csv")}),
            0)
      << err_.str();
  auto report = nlohmann::json::parse(read(path("r.json")));
  for (const char* key : {"auc", "knee_threshold", "sensitivity", "specificity", "youden_j", "predictions"}) {
    EXPECT_TRUE(report.contains(key)) << key;
  }
  EXPECT_EQ(read(path("roc.csv")).rfind("threshold,tpr,fpr\ninf,0,0\n", 0), 0u);

  write(path("wide.json"), "{\"n_patients\": 4, \"dimension\": 5}");
  ASSERT_EQ(call({"synth", "--config", path("wide.json"), "--out", path("wide.csv")}), 0);
  EXPECT_EQ(call({"eval", "--model", path("m.fold0.json"), "--input", path("wide.csv"), "--scores",
                  path("scores.csv")}),
            3);
  EXPECT_NE(err_.str().find("dimension"), std::string::npos);
}

TEST_F(Cli, SynthWritesCohortAndMask) {
  ASSERT_EQ(call({"synth", "--seed", "9", "--out", path("c.jsonl")}), 0);
  EXPECT_TRUE(fs::exists(path("c.planted.csv")));
  EXPECT_EQ(read(path("c.planted.csv")).rfind("lesion_id,planted_outlier\n", 0), 0u);
  ASSERT_EQ(call({"synth", "--seed", "9", "--out", path("d.jsonl"), "--mask-out", path("mask.csv")}), 0);
  EXPECT_EQ(read(path("c.jsonl")), read(path("d.jsonl")));
  EXPECT_EQ(call({"validate", "--input", path("c.jsonl")}), 0);
}

TEST_F(Cli, EnsembleAveragesPredictions) {
  write(path("a.csv"), "lesion_id,p,outlier_score\nx,0.2,1\ny,0.8,1\n");
  write(path("b.csv"), "lesion_id,p,outlier_score\nx,0.6,1\ny,0.4,1\n");
  ASSERT_EQ(call({"ensemble", "--scores", path("a.csv") + "," + path("b.csv"), "--weights", "1,3", "--out",
                  path("e.csv")}),
            0)
      << err_.str();
  auto merged = duckling::parse_predictions_csv(read(path("e.csv")));
  ASSERT_EQ(merged.size(), 2u);
  EXPECT_EQ(merged[0].lesion_id, "x");
  EXPECT_NEAR(merged[0].p, 0.5, 1e-15);
  EXPECT_NEAR(merged[1].p, 0.5, 1e-15);
  write(path("c.csv"), "lesion_id,p\nx,0.6\n");
  EXPECT_EQ(call({"ensemble", "--scores", path("a.csv") + "," + path("c.csv"), "--out", path("e.csv")}), 1);
}
