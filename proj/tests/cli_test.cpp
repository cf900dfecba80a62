#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cli.hpp"
#include "hai/dataset.hpp"
#include "hai/keyed_stream.hpp"
#include "support.hpp"

namespace hai {
namespace {

namespace fs = std::filesystem;

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::vector<std::uint8_t> slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

nlohmann::json load_json(const fs::path& p) {
  std::ifstream in(p);
  return nlohmann::json::parse(in);
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override { dir_ = test::temp_dir(::testing::UnitTest::GetInstance()->current_test_info()->name()); }
  void TearDown() override { fs::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  void make_data(const std::string& feat = "3000") {
    ASSERT_EQ(run({"gen-synth", "--out-train", path("train.hai"), "--out-val", path("val.hai"), "--n-train", "300",
                   "--n-val", "40", "--n-feat", feat})
                  .code,
              0);
    ASSERT_EQ(run({"genkey", "--out", path("k.key")}).code, 0);
  }

  fs::path dir_;
};

TEST_F(Cli, GenkeyWritesDistinctKeysAndRefusesOverwrite) {
  ASSERT_EQ(run({"genkey", "--out", path("a.key")}).code, 0);
  ASSERT_EQ(run({"genkey", "--out", path("b.key")}).code, 0);
  EXPECT_EQ(fs::file_size(path("a.key")), 65u);
  EXPECT_NE(slurp(path("a.key")), slurp(path("b.key")));
  EXPECT_EQ(fs::status(path("a.key")).permissions() & fs::perms::all, fs::perms::owner_read);

  const auto before = slurp(path("a.key"));
  const auto again = run({"genkey", "--out", path("a.key")});
  EXPECT_NE(again.code, 0);
  EXPECT_FALSE(again.err.empty());
  EXPECT_EQ(slurp(path("a.key")), before);
  EXPECT_EQ(run({"genkey", "--out", path("a.key"), "--force"}).code, 0);
  EXPECT_NE(slurp(path("a.key")), before);
}

TEST_F(Cli, ProtectIsDeterministic) {
  make_data();
  for (const char* out : {"p1.hai", "p2.hai"}) {
    const auto r = run({"protect", "--key", path("k.key"), "--in", path("train.hai"), "--out", path(out),
                        "--permute-classes"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("size ratio"), std::string::npos);
  }
  EXPECT_EQ(slurp(path("p1.hai")), slurp(path("p2.hai")));
  const auto ds = read_hai1(path("p1.hai"));
  EXPECT_EQ(ds.meta.scheme, ContainerScheme::BinarySample);
  EXPECT_EQ(ds.meta.n_out, 1000u);
  EXPECT_EQ(ds.size(), 300u);

  ASSERT_EQ(run({"protect", "--key", path("k.key"), "--in", path("train.hai"), "--out", path("s.hai"),
                 "--strip-labels"})
                .code,
            0);
  EXPECT_FALSE(read_hai1(path("s.hai")).has_labels());
}

TEST_F(Cli, ClusterClassifyAndRandIndex) {
  make_data();
  ASSERT_EQ(run({"protect", "--key", path("k.key"), "--in", path("train.hai"), "--out", path("p.hai"),
                 "--permute-classes"})
                .code,
            0);
  ASSERT_EQ(run({"cluster", "--in", path("train.hai"), "--out", path("plain.json")}).code, 0);
  const auto r = run({"cluster", "--in", path("p.hai"), "--out", path("prot.json"), "--key", path("k.key"), "--plain",
                      path("train.hai"), "--permute-classes"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto part = load_json(path("prot.json"));
  EXPECT_EQ(part["k"], 2);
  EXPECT_EQ(part["assignments"].size(), 300u);

  const auto self = run({"rand-index", path("plain.json"), path("plain.json")});
  ASSERT_EQ(self.code, 0);
  EXPECT_DOUBLE_EQ(std::stod(self.out), 1.0);
  const auto cross = run({"rand-index", path("plain.json"), path("prot.json")});
  ASSERT_EQ(cross.code, 0);
  EXPECT_GE(std::stod(cross.out), 0.98);

  const auto c = run({"classify", "--train", path("train.hai"), "--query", path("val.hai"), "--out", path("pred.json")});
  ASSERT_EQ(c.code, 0) << c.err;
  EXPECT_EQ(load_json(path("pred.json"))["predictions"].size(), 40u);
}

TEST_F(Cli, UsageAndDataErrors) {
  EXPECT_EQ(run({}).code, cli::kUsage);
  EXPECT_EQ(run({"no-such-command"}).code, cli::kUsage);
  EXPECT_EQ(run({"protect", "--in", "x"}).code, cli::kUsage);
  EXPECT_EQ(run({"gen-synth", "--out-train", path("t"), "--out-val", path("v"), "--n-feat", "0"}).code, cli::kUsage);

  std::ofstream(path("junk.hai")) << "HAI1 not really";
  ASSERT_EQ(run({"genkey", "--out", path("k.key")}).code, 0);
  const auto bad = run({"protect", "--key", path("k.key"), "--in", path("junk.hai"), "--out", path("o.hai")});
  EXPECT_EQ(bad.code, cli::kDataError);
  EXPECT_FALSE(bad.err.empty());
  EXPECT_EQ(run({"rand-index", path("missing.json"), path("missing.json")}).code, cli::kDataError);
}

TEST_F(Cli, BenchCheckExitCodeFollowsChecks) {
  make_data("49955");
  const auto r = run({"bench", "--train", path("train.hai"), "--val", path("val.hai"), "--key", path("k.key"),
                      "--runs", "1", "--out", path("bench.json"), "--check"});
  const bool any_fail = r.out.find("FAIL ") != std::string::npos;
  EXPECT_NE(r.out.find("PASS "), std::string::npos) << r.out;
  EXPECT_EQ(r.code, any_fail ? cli::kCheckFailed : cli::kOk) << r.out << r.err;
  const auto report = load_json(path("bench.json"));
  EXPECT_EQ(report["n_in"], 49955);
  EXPECT_EQ(report["n_out"], 16651);
  EXPECT_GE(report["rand_index"].get<double>(), 0.98);
  EXPECT_GE(report["knn_agreement"].get<double>(), 0.98);
}

TEST_F(Cli, AttackReportsAreJson) {
  const std::vector<std::string> base{"attack", "preimage", "--n-in", "16", "--delta", "2", "--with-key", "--targets", "4"};
  auto with_out = [&](const std::string& name) {
    auto args = base;
    args.insert(args.end(), {"--out", path(name)});
    return args;
  };
  const auto r = run(with_out("pre.json"));
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = load_json(path("pre.json"));
  EXPECT_EQ(j["name"], "preimage");
  EXPECT_EQ(j["metrics"]["preimages_max"], 256.0);
  const auto again = run(with_out("p2.json"));
  ASSERT_EQ(again.code, 0);
  auto a = load_json(path("pre.json"));
  auto b = load_json(path("p2.json"));
  a.erase("wall_ms");
  b.erase("wall_ms");
  EXPECT_EQ(a, b);
}

}  // namespace
}  // namespace hai
