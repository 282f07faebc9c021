#include "fraclab/ensemble.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace fraclab {

namespace {
constexpr char kMagic[8] = {'F', 'R', 'A', 'C', 'E', 'N', 'S', '1'};
}

std::string to_string(EnsembleKind kind) {
  switch (kind) {
    case EnsembleKind::kFbmIncrements: return "fbm_increments";
    case EnsembleKind::kFou: return "fou";
    case EnsembleKind::kMarkovChain: return "markov_chain";
  }
  throw std::logic_error("unknown EnsembleKind");
}

EnsembleKind ensemble_kind_from_string(const std::string& s) {
  if (s == "fbm_increments") return EnsembleKind::kFbmIncrements;
  if (s == "fou") return EnsembleKind::kFou;
  if (s == "markov_chain") return EnsembleKind::kMarkovChain;
  throw std::invalid_argument("unknown ensemble kind: " + s);
}

StationaryEnsemble::StationaryEnsemble(TimeGrid grid, std::vector<double> values,
                                       std::size_t n_paths, EnsembleKind kind,
                                       std::optional<double> h, bool normalized,
                                       std::uint64_t seed)
    : grid_(grid),
      values_(std::move(values)),
      n_paths_(n_paths),
      kind_(kind),
      h_(h),
      normalized_(normalized),
      seed_(seed) {
  if (values_.size() != n_paths_ * grid_.count())
    throw std::invalid_argument("StationaryEnsemble: values size mismatch");
  if (n_paths_ == 0)
    throw std::invalid_argument("StationaryEnsemble: need at least one path");
}

std::vector<double> StationaryEnsemble::column(std::size_t i) const {
  std::vector<double> col(n_paths_);
  for (std::size_t p = 0; p < n_paths_; ++p) col[p] = at(p, i);
  return col;
}

void StationaryEnsemble::save(const std::string& filename) const {
  nlohmann::json header;
  header["grid"] = {{"step", grid_.step()}, {"count", grid_.count()}};
  header["kind"] = to_string(kind_);
  if (h_) header["h"] = *h_;
  header["normalized"] = normalized_;
  header["seed"] = seed_;
  header["n_paths"] = n_paths_;
  const std::string hs = header.dump();

  std::ofstream out(filename, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + filename);
  out.write(kMagic, sizeof(kMagic));
  const std::uint64_t hlen = hs.size();
  out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
  out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
  out.write(reinterpret_cast<const char*>(values_.data()),
            static_cast<std::streamsize>(values_.size() * sizeof(double)));
  if (!out) throw std::runtime_error("write failed: " + filename);
}

StationaryEnsemble StationaryEnsemble::load(const std::string& filename) {
  std::ifstream in(filename, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for reading: " + filename);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(magic)) != 0)
    throw std::runtime_error("not an ensemble container: " + filename);
  std::uint64_t hlen = 0;
  in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
  std::string hs(hlen, '\0');
  in.read(hs.data(), static_cast<std::streamsize>(hlen));
  const auto header = nlohmann::json::parse(hs);

  TimeGrid grid(header.at("grid").at("step").get<double>(),
                header.at("grid").at("count").get<std::size_t>());
  const auto kind = ensemble_kind_from_string(header.at("kind").get<std::string>());
  std::optional<double> h;
  if (header.contains("h")) h = header.at("h").get<double>();
  const bool normalized = header.at("normalized").get<bool>();
  const auto seed = header.at("seed").get<std::uint64_t>();
  const auto n_paths = header.at("n_paths").get<std::size_t>();

  std::vector<double> values(n_paths * grid.count());
  in.read(reinterpret_cast<char*>(values.data()),
          static_cast<std::streamsize>(values.size() * sizeof(double)));
  if (!in) throw std::runtime_error("truncated ensemble container: " + filename);
  return StationaryEnsemble(grid, std::move(values), n_paths, kind, h,
                            normalized, seed);
}

void StationaryEnsemble::export_csv(const std::string& filename,
                                    std::size_t max_paths) const {
  std::ofstream out(filename);
  if (!out) throw std::runtime_error("cannot open for writing: " + filename);
  out.precision(17);
  out << "t";
  const std::size_t np = std::min(n_paths_, max_paths);
  for (std::size_t p = 0; p < np; ++p) out << ",path" << p;
  out << "\n";
  for (std::size_t i = 0; i < grid_.count(); ++i) {
    out << grid_.time(i);
    for (std::size_t p = 0; p < np; ++p) out << "," << at(p, i);
    out << "\n";
  }
}

}  // namespace fraclab
