#include "mvlab/io.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>

#include "mvlab/error.hpp"

#ifndef MVLAB_GIT_DESCRIBE
#define MVLAB_GIT_DESCRIBE "unknown"
#endif

namespace mvlab {

namespace fs = std::filesystem;

static_assert(std::endian::native == std::endian::little, "binary cloud format assumes a little-endian host");

const char* build_version() noexcept { return MVLAB_GIT_DESCRIBE; }

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace {

double parse_double_field(std::string_view s, const fs::path& path, std::size_t line) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw ConfigError(path.string() + ":" + std::to_string(line) + ": malformed number '" + std::string(s) + "'");
  return v;
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    out.push_back(line.substr(start, comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace

void write_cloud_csv(const ParticleCloud& mu, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << "t,w";
  for (int c = 0; c < mu.dim(); ++c) out << ",x" << (c + 1);
  out << '\n';
  const std::string t = format_double(mu.time());
  std::string row;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    row = t;
    row += ',';
    row += format_double(mu.weight(i));
    for (double x : mu.position(i)) {
      row += ',';
      row += format_double(x);
    }
    row += '\n';
    out << row;
  }
  if (!out) throw Error("failed writing " + path.string());
}

ParticleCloud read_cloud_csv(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ConfigError(path.string() + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split(line);
  if (header.size() < 3 || header.size() > 5 || header[0] != "t" || header[1] != "w")
    throw ConfigError(path.string() + ": header must be t,w,x1[,x2,x3]");
  const int d = static_cast<int>(header.size()) - 2;
  for (int c = 0; c < d; ++c)
    if (header[c + 2] != "x" + std::to_string(c + 1)) throw ConfigError(path.string() + ": header must be t,w,x1[,x2,x3]");
  std::vector<double> pos;
  std::vector<double> w;
  double t = 0.0;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto f = split(line);
    if (f.size() != header.size())
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": expected " + std::to_string(header.size()) +
                        " fields");
    const double ti = parse_double_field(f[0], path, lineno);
    if (w.empty()) {
      t = ti;
    } else if (ti != t) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": rows carry different times");
    }
    w.push_back(parse_double_field(f[1], path, lineno));
    for (int c = 0; c < d; ++c) pos.push_back(parse_double_field(f[c + 2], path, lineno));
  }
  return ParticleCloud(d, std::move(pos), std::move(w), t);
}

void write_cloud_binary(const ParticleCloud& mu, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out.write("MVPC1", 5);
  const auto d = static_cast<std::uint32_t>(mu.dim());
  const auto n = static_cast<std::uint64_t>(mu.size());
  const double t = mu.time();
  out.write(reinterpret_cast<const char*>(&d), sizeof d);
  out.write(reinterpret_cast<const char*>(&n), sizeof n);
  out.write(reinterpret_cast<const char*>(&t), sizeof t);
  out.write(reinterpret_cast<const char*>(mu.weights().data()), static_cast<std::streamsize>(n * sizeof(double)));
  std::vector<double> col(n);
  for (std::uint32_t c = 0; c < d; ++c) {
    for (std::uint64_t i = 0; i < n; ++i) col[i] = mu.positions()[i * d + c];
    out.write(reinterpret_cast<const char*>(col.data()), static_cast<std::streamsize>(n * sizeof(double)));
  }
  if (!out) throw Error("failed writing " + path.string());
}

ParticleCloud read_cloud_binary(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path.string());
  char magic[5];
  std::uint32_t d = 0;
  std::uint64_t n = 0;
  double t = 0.0;
  in.read(magic, 5);
  if (!in || std::memcmp(magic, "MVPC1", 5) != 0) throw ConfigError(path.string() + ": not an MVPC1 file");
  in.read(reinterpret_cast<char*>(&d), sizeof d);
  in.read(reinterpret_cast<char*>(&n), sizeof n);
  in.read(reinterpret_cast<char*>(&t), sizeof t);
  if (!in || d < 1 || d > 3 || n < 1 || n > (std::uint64_t{1} << 36)) throw ConfigError(path.string() + ": bad header");
  std::vector<double> w(n);
  in.read(reinterpret_cast<char*>(w.data()), static_cast<std::streamsize>(n * sizeof(double)));
  std::vector<double> pos(n * d);
  std::vector<double> col(n);
  for (std::uint32_t c = 0; c < d; ++c) {
    in.read(reinterpret_cast<char*>(col.data()), static_cast<std::streamsize>(n * sizeof(double)));
    for (std::uint64_t i = 0; i < n; ++i) pos[i * d + c] = col[i];
  }
  if (!in) throw ConfigError(path.string() + ": truncated file");
  return ParticleCloud(static_cast<int>(d), std::move(pos), std::move(w), t);
}

void require_known_keys(const Json& j, std::initializer_list<const char*> allowed, const std::string& context) {
  if (!j.is_object()) throw ConfigError(context + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError(context + ": unknown key '" + key + "'");
  }
}

namespace {

template <class T>
T get_field(const Json& j, const char* key, const std::string& context) {
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(context + ": field '" + key + "' is missing or has the wrong type");
  }
}

std::vector<std::vector<std::string>> matrix_strings(const std::vector<Expr>& m, int rows, int cols) {
  std::vector<std::vector<std::string>> out(rows);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) out[i].push_back(m[static_cast<std::size_t>(i * cols + j)].to_string());
  return out;
}

std::vector<std::string> vector_strings(const std::vector<Expr>& v) {
  std::vector<std::string> out;
  for (const auto& e : v) out.push_back(e.to_string());
  return out;
}

}  // namespace

Json model_to_json(const ModelSpec& ms) {
  Json j;
  j["d"] = ms.dim();
  j["m"] = ms.noise_dim();
  j["T"] = ms.period();
  j["drift"] = vector_strings(ms.drift(Which::kMain));
  j["diffusion"] = matrix_strings(ms.diffusion(Which::kMain), ms.dim(), ms.noise_dim());
  if (ms.has_coupled_drift()) j["coupled_drift"] = vector_strings(ms.drift(Which::kCoupled));
  if (ms.has_coupled_diffusion())
    j["coupled_diffusion"] = matrix_strings(ms.diffusion(Which::kCoupled), ms.dim(), ms.noise_dim());
  if (ms.trunc_radius()) j["trunc_radius"] = *ms.trunc_radius();
  if (!ms.label().empty()) j["label"] = ms.label();
  return j;
}

ModelSpec model_from_json(const Json& j) {
  const std::string ctx = "model";
  require_known_keys(j, {"d", "m", "T", "drift", "diffusion", "coupled_drift", "coupled_diffusion", "trunc_radius", "label"},
                     ctx);
  const int d = get_field<int>(j, "d", ctx);
  const int m = j.contains("m") ? get_field<int>(j, "m", ctx) : d;
  const double T = get_field<double>(j, "T", ctx);
  const auto drift = get_field<std::vector<std::string>>(j, "drift", ctx);
  const auto diffusion = get_field<std::vector<std::vector<std::string>>>(j, "diffusion", ctx);
  std::optional<std::vector<std::string>> cd;
  std::optional<std::vector<std::vector<std::string>>> cs;
  std::optional<double> radius;
  if (j.contains("coupled_drift")) cd = get_field<std::vector<std::string>>(j, "coupled_drift", ctx);
  if (j.contains("coupled_diffusion")) cs = get_field<std::vector<std::vector<std::string>>>(j, "coupled_diffusion", ctx);
  if (j.contains("trunc_radius") && !j["trunc_radius"].is_null()) radius = get_field<double>(j, "trunc_radius", ctx);
  if (diffusion.size() != static_cast<std::size_t>(d)) throw ConfigError("model: diffusion must have d rows");
  if (cs && cs->size() != static_cast<std::size_t>(d)) throw ConfigError("model: coupled_diffusion must have d rows");
  ModelSpec ms = ModelSpec::parse(d, m, T, drift, diffusion, cd, cs, radius);
  if (j.contains("label")) ms = ms.with_label(get_field<std::string>(j, "label", ctx));
  return ms;
}

Json sim_config_to_json(const SimConfig& cfg) {
  Json j;
  j["N"] = cfg.N;
  j["dt"] = cfg.dt;
  j["t0"] = cfg.t0;
  j["t1"] = cfg.t1;
  j["seed"] = cfg.seed;
  j["record_stride"] = cfg.record_stride;
  j["blowup_radius"] = cfg.blowup_radius;
  return j;
}

SimConfig sim_config_from_json(const Json& j, const SimConfig& defaults) {
  const std::string ctx = "sim";
  require_known_keys(j, {"N", "dt", "t0", "t1", "seed", "record_stride", "blowup_radius"}, ctx);
  SimConfig c = defaults;
  auto positive_int = [&](const char* key) -> std::size_t {
    const auto& v = j.at(key);
    if (!v.is_number_integer() || v.get<long long>() < 1) throw ConfigError(std::string(key) + " must be a positive integer");
    return v.get<std::size_t>();
  };
  if (j.contains("N")) c.N = positive_int("N");
  if (j.contains("record_stride")) c.record_stride = positive_int("record_stride");
  if (j.contains("dt")) c.dt = get_field<double>(j, "dt", ctx);
  if (j.contains("t0")) c.t0 = get_field<double>(j, "t0", ctx);
  if (j.contains("t1")) c.t1 = get_field<double>(j, "t1", ctx);
  if (j.contains("seed")) c.seed = get_field<std::uint64_t>(j, "seed", ctx);
  if (j.contains("blowup_radius")) c.blowup_radius = get_field<double>(j, "blowup_radius", ctx);
  if (!(c.dt > 0.0)) throw ConfigError("dt must be positive");
  return c;
}

namespace {

std::string snap_name(const char* prefix, std::size_t k) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s_%06zu.csv", prefix, k);
  return buf;
}

}  // namespace

void export_trajectory(const Trajectory& traj, const fs::path& dir) {
  fs::create_directories(dir);
  Json files = Json::array();
  Json coupled = Json::array();
  for (std::size_t k = 0; k < traj.snapshots.size(); ++k) {
    const std::string name = snap_name("snap", k);
    write_cloud_csv(traj.snapshots[k], dir / name);
    files.push_back(name);
  }
  for (std::size_t k = 0; k < traj.coupled.size(); ++k) {
    const std::string name = snap_name("coupled", k);
    write_cloud_csv(traj.coupled[k], dir / name);
    coupled.push_back(name);
  }
  Json m;
  m["format"] = "mvlab-trajectory-1";
  m["build"] = build_version();
  if (traj.model) m["model"] = model_to_json(*traj.model);
  m["config"] = sim_config_to_json(traj.config);
  m["seed"] = traj.config.seed;
  m["dt_effective"] = traj.dt_effective;
  m["n_steps"] = traj.n_steps;
  m["times"] = traj.times();
  m["snapshots"] = files;
  if (!coupled.empty()) m["coupled"] = coupled;
  write_json(m, dir / "manifest.json");
}

Trajectory import_trajectory(const fs::path& dir) {
  const Json m = read_json(dir / "manifest.json");
  if (m.value("format", "") != "mvlab-trajectory-1") throw ConfigError(dir.string() + ": unrecognised manifest");
  Trajectory traj;
  if (m.contains("model")) traj.model = std::make_shared<const ModelSpec>(model_from_json(m["model"]));
  traj.config = sim_config_from_json(m.at("config"));
  traj.dt_effective = m.at("dt_effective").get<double>();
  traj.n_steps = m.at("n_steps").get<std::uint64_t>();
  for (const auto& name : m.at("snapshots")) traj.snapshots.push_back(read_cloud_csv(dir / name.get<std::string>()));
  if (m.contains("coupled"))
    for (const auto& name : m["coupled"]) traj.coupled.push_back(read_cloud_csv(dir / name.get<std::string>()));
  return traj;
}

void write_json(const Json& j, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw Error("failed writing " + path.string());
}

Json read_json(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path.string());
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

}  // namespace mvlab
