#include <cstdlib>
#include <fstream>

#include <doctest.h>

#include "helpers.hpp"
#include "tdlfd/error.hpp"
#include "tdlfd/manifest.hpp"

using namespace tdlfd;

TEST_SUITE("manifest") {

TEST_CASE("SHA-256 known digests") {
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  testing::TempDir dir("sha");
  {
    std::ofstream out(dir / "abc.txt", std::ios::binary);
    out << "abc";
  }
  CHECK(sha256_file(dir / "abc.txt") == sha256_hex("abc"));
  CHECK_THROWS_AS(sha256_file(dir / "missing"), Error);
}

TEST_CASE("resources resolve by path, by name and through the search path") {
  CHECK(resolve_resource("eight", "tasks") == testing::data_dir() / "tasks" / "eight.json");
  CHECK(resolve_resource("robot_eight.json", "robots") == testing::data_dir() / "robots" / "robot_eight.json");
  const auto direct = (testing::data_dir() / "tasks" / "anatomy.json").string();
  CHECK(resolve_resource(direct, "tasks") == direct);
  CHECK_THROWS_AS(resolve_resource("no-such-task", "tasks"), Error);

  testing::TempDir dir("datapath");
  std::filesystem::create_directories(dir / "tasks");
  {
    std::ofstream out(dir / "tasks" / "eight.json");
    out << "{}";
  }
  ::setenv("TDLFD_DATA_PATH", (std::string("/nonexistent:") + dir.path().string()).c_str(), 1);
  const auto paths = data_search_path();
  CHECK(paths.size() == 3);
  CHECK(resolve_resource("eight", "tasks") == dir / "tasks" / "eight.json");
  ::unsetenv("TDLFD_DATA_PATH");
  CHECK(resolve_resource("eight", "tasks") == testing::data_dir() / "tasks" / "eight.json");
}

TEST_CASE("manifests record parameters and input digests next to the output") {
  testing::TempDir dir("manifest");
  const auto input = dir / "in.txt";
  {
    std::ofstream out(input);
    out << "abc";
  }
  RunManifest m;
  m.command = "train";
  m.parameters = {{"alpha", 0.01}};
  m.inputs = {input};
  m.seed = 3;
  m.started = utc_timestamp();
  m.finished = utc_timestamp();
  const std::string name = write_manifest(m, dir / "model.json");
  CHECK(name == "model.json.manifest.json");
  std::ifstream in(dir / name);
  const auto doc = nlohmann::json::parse(in);
  CHECK(doc["format"] == "tdlfd-manifest");
  CHECK(doc["command"] == "train");
  CHECK(doc["parameters"]["alpha"] == 0.01);
  CHECK(doc["inputs"][input.string()] == sha256_hex("abc"));
  CHECK(doc["seed"] == 3);
  CHECK(doc["tool_version"] == std::string(tool_version()));
  CHECK(doc["started"].get<std::string>().size() == 20);
}

}  // TEST_SUITE
