#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include <doctest.h>

#include "fraclab/ensemble.hpp"
#include "fraclab/noise.hpp"

using namespace fraclab;

TEST_CASE("StationaryEnsemble: binary round trip is bit exact") {
  const TimeGrid grid(0.125, 48);
  const auto ens = noise::sample_fou(grid, HurstParameter(0.7), 12, 3,
                                     noise::FouMethod::kExactCovariance);
  const auto path = std::filesystem::temp_directory_path() / "fraclab_ens_rt.bin";
  ens.save(path.string());
  const auto back = StationaryEnsemble::load(path.string());
  CHECK(back.grid() == ens.grid());
  CHECK(back.kind() == ens.kind());
  CHECK(back.n_paths() == ens.n_paths());
  CHECK(back.normalized() == ens.normalized());
  CHECK(back.seed() == ens.seed());
  REQUIRE(back.h().has_value());
  CHECK(*back.h() == *ens.h());
  CHECK(back.values() == ens.values());  // exact doubles, no text round trip
  std::filesystem::remove(path);
}

TEST_CASE("StationaryEnsemble: load rejects foreign files") {
  const auto path = std::filesystem::temp_directory_path() / "fraclab_ens_bad.bin";
  {
    std::ofstream out(path, std::ios::binary);
    out << "definitely not an ensemble";
  }
  CHECK_THROWS(static_cast<void>(StationaryEnsemble::load(path.string())));
  std::filesystem::remove(path);
}

TEST_CASE("StationaryEnsemble: csv export is bounded and parseable") {
  const TimeGrid grid(0.5, 8);
  const auto ens = noise::sample_fbm(grid, HurstParameter(0.5), 100, 5);
  const auto path = std::filesystem::temp_directory_path() / "fraclab_ens.csv";
  ens.export_csv(path.string(), 3);
  std::ifstream in(path);
  std::string line;
  std::size_t rows = 0, commas = 0;
  while (std::getline(in, line)) {
    if (rows == 1) {
      for (char c : line) commas += (c == ',');
    }
    ++rows;
  }
  CHECK(rows == 9);        // header + 8 grid rows
  CHECK(commas == 3);      // time column + 3 paths
  std::filesystem::remove(path);
}
