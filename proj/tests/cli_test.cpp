#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

struct Output {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("spikelab_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  Output run(const std::string& args) {
    const fs::path err = dir_ / "stderr.txt";
    const std::string cmd = std::string(SPIKELAB_CLI) + " " + args + " 2>" + err.string();
    Output o;
    FILE* p = popen(cmd.c_str(), "r");
    char buf[4096];
    std::size_t n;
    while ((n = fread(buf, 1, sizeof buf, p)) > 0) o.out.append(buf, n);
    const int status = pclose(p);
    o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    o.err = slurp(err);
    return o;
  }
  std::string synth(std::size_t channels = 4, std::size_t samples = 60) {
    const auto path = (dir_ / "data.json").string();
    const auto o = run("synth --classes 2 --repetitions 2 --channels " + std::to_string(channels) +
                       " --samples " + std::to_string(samples) + " --out " + path);
    EXPECT_EQ(o.code, 0) << o.err;
    return path;
  }

  fs::path dir_;
};

}  // namespace

TEST_F(Cli, SynthThenEncode) {
  const auto ds = synth();
  const auto out = dir_ / "out";
  const auto o = run("encode --dataset " + ds + " --model mn --preset tonic_spiking --class A --repetition 1 "
                     "--upsample 5 --scale 2 --split-signed --out " + out.string() +
                     " --audio " + (out / "a.wav").string());
  ASSERT_EQ(o.code, 0) << o.err;
  EXPECT_NE(o.out.find("result.json"), std::string::npos);
  const auto result = nlohmann::json::parse(slurp(out / "result.json"));
  EXPECT_EQ(result["model_id"], "mn");
  EXPECT_EQ(result["channels"].size(), 8u);
  EXPECT_EQ(result["preprocess"]["upsample_factor"], 5);
  EXPECT_FALSE(result["metadata"]["argv"].empty());
  EXPECT_TRUE(fs::exists(out / "raster.csv"));
  EXPECT_TRUE(fs::exists(out / "a.wav"));
}

TEST_F(Cli, ExitCodes) {
  const auto ds = synth();
  const auto out = (dir_ / "o").string();
  EXPECT_EQ(run("encode --dataset " + ds + " --out " + out + " --bogus").code, 1);
  EXPECT_EQ(run("encode --dataset " + ds + " --class A --repetition 0 --param v_th=0.505 --out " + out).code, 1);
  EXPECT_EQ(run("encode --dataset " + ds + " --class A --repetition 0 --model nope --out " + out).code, 1);
  EXPECT_EQ(run("encode --dataset " + (dir_ / "missing.json").string() + " --out " + out).code, 2);
  std::ofstream(dir_ / "broken.json") << "{\"trials\": [";
  const auto bad = run("encode --dataset " + (dir_ / "broken.json").string() + " --out " + out);
  EXPECT_EQ(bad.code, 2);
  EXPECT_TRUE(bad.out.empty());
  EXPECT_NE(bad.err.find("malformed_file"), std::string::npos);
  const auto slow = (dir_ / "slow.json").string();
  ASSERT_EQ(run("synth --classes 1 --repetitions 1 --channels 2 --samples 400 --sample-rate 20 --out " + slow).code, 0);
  const auto div = run("encode --dataset " + slow + " --class A --repetition 0 --model izhikevich "
                       "--param a=0.2 --out " + out);
  EXPECT_EQ(div.code, 3) << div.err;
  EXPECT_NE(div.err.find("numerical_divergence"), std::string::npos);
}

TEST_F(Cli, Sweep) {
  const auto ds = synth();
  const auto o = run("sweep --dataset " + ds + " --class A --repetition 0 --scale 3 --upsample 10 "
                     "--sweep-param v_th --from 0.5 --to 1.5 --steps 3");
  ASSERT_EQ(o.code, 0) << o.err;
  EXPECT_EQ(o.out.rfind("value,count_ch0", 0), 0u);
  EXPECT_EQ(std::count(o.out.begin(), o.out.end(), '\n'), 4);
  const auto grid = run("sweep --dataset " + ds + " --class A --repetition 0 --sweep-param v_th "
                        "--from 0.5 --to 1.0 --steps 4");
  EXPECT_EQ(grid.code, 1);
  EXPECT_NE(grid.err.find("v_th"), std::string::npos);
}

TEST_F(Cli, ServePrintsPort) {
  const fs::path log = dir_ / "serve.out";
  const std::string cmd = std::string(SPIKELAB_CLI) + " serve --port 0 >" + log.string() + " 2>/dev/null & echo $!";
  FILE* p = popen(cmd.c_str(), "r");
  char buf[64] = {};
  ASSERT_TRUE(fgets(buf, sizeof buf, p));
  pclose(p);
  const int pid = std::atoi(buf);
  std::string port;
  for (int i = 0; i < 100 && port.empty(); ++i) {
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
    port = slurp(log);
  }
  ASSERT_FALSE(port.empty());
  EXPECT_GT(std::stoi(port), 0);
  EXPECT_EQ(std::system(("kill -TERM " + std::to_string(pid)).c_str()), 0);
}

TEST_F(Cli, SynthIsReproducible) {
  const auto a = (dir_ / "a.json").string(), b = (dir_ / "b.json").string();
  ASSERT_EQ(run("synth --seed 11 --out " + a).code, 0);
  ASSERT_EQ(run("synth --seed 11 --out " + b).code, 0);
  EXPECT_EQ(slurp(a), slurp(b));
}

TEST_F(Cli, SweepSingleStepAndUnknownParameter) {
  const auto ds = synth();
  const std::string common = " --dataset " + ds + " --class B --repetition 1 --scale 2.5 --upsample 5";
  const auto one = run("sweep" + common + " --sweep-param v_th --from 0.8 --to 0.8 --steps 1");
  ASSERT_EQ(one.code, 0) << one.err;
  const auto out = dir_ / "enc";
  ASSERT_EQ(run("encode" + common + " --param v_th=0.8 --out " + out.string()).code, 0);
  const auto result = nlohmann::json::parse(slurp(out / "result.json"));
  std::istringstream rows(one.out);
  std::string header, line;
  std::getline(rows, header);
  std::getline(rows, line);
  std::size_t total = 0;
  for (const auto& c : result["statistics"]["counts"]) total += c.get<std::size_t>();
  std::size_t from_sweep = 0;
  std::istringstream cells(line);
  std::string cell;
  std::getline(cells, cell, ',');
  EXPECT_DOUBLE_EQ(std::stod(cell), 0.8);
  const auto n_channels = result["statistics"]["counts"].size();
  for (std::size_t i = 0; i < n_channels && std::getline(cells, cell, ','); ++i) from_sweep += std::stoul(cell);
  EXPECT_GT(total, 0u);
  EXPECT_EQ(from_sweep, total);

  EXPECT_EQ(run("sweep" + common + " --sweep-param tau_w --from 1 --to 2 --steps 2").code, 1);
}
