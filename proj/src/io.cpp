#include "codis/io.hpp"

#include <cstring>
#include <filesystem>
#include <sstream>
#include <stdexcept>

namespace codis::io {

namespace {

void put_le(std::ostream& os, std::uint64_t v, int bytes) {
  char buf[8];
  for (int i = 0; i < bytes; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(buf, bytes);
}

std::uint64_t get_le(std::istream& is, int bytes) {
  char buf[8];
  is.read(buf, bytes);
  if (!is) throw std::runtime_error("unexpected end of file");
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i)
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[i])) << (8 * i);
  return v;
}

}  // namespace

void write_u32(std::ostream& os, std::uint32_t v) { put_le(os, v, 4); }
void write_u64(std::ostream& os, std::uint64_t v) { put_le(os, v, 8); }
void write_i32(std::ostream& os, std::int32_t v) {
  put_le(os, static_cast<std::uint32_t>(v), 4);
}

void write_f64(std::ostream& os, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_le(os, bits, 8);
}

void write_f64_array(std::ostream& os, const double* p, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) write_f64(os, p[i]);
}

std::uint32_t read_u32(std::istream& is) { return static_cast<std::uint32_t>(get_le(is, 4)); }
std::uint64_t read_u64(std::istream& is) { return get_le(is, 8); }
std::int32_t read_i32(std::istream& is) {
  return static_cast<std::int32_t>(static_cast<std::uint32_t>(get_le(is, 4)));
}

double read_f64(std::istream& is) {
  const std::uint64_t bits = get_le(is, 8);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

void read_f64_array(std::istream& is, double* p, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) p[i] = read_f64(is);
}

void write_magic(std::ostream& os, const char magic[8]) { os.write(magic, 8); }

void expect_magic(std::istream& is, const char magic[8], const std::string& what) {
  char buf[8];
  is.read(buf, 8);
  if (!is || std::memcmp(buf, magic, 8) != 0)
    throw std::runtime_error("bad magic: not a " + what + " file");
}

std::ofstream open_out(const std::string& path, bool binary) {
  std::ofstream os(path, binary ? std::ios::binary | std::ios::trunc : std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  return os;
}

std::ifstream open_in(const std::string& path, bool binary) {
  std::ifstream is(path, binary ? std::ios::binary : std::ios::in);
  if (!is) throw std::runtime_error("cannot open: " + path);
  return is;
}

void write_manifest(const std::string& path,
                    const std::vector<std::pair<std::string, std::string>>& entries) {
  auto os = open_out(path, false);
  for (const auto& [k, v] : entries) os << k << " = " << v << "\n";
}

Manifest read_manifest(const std::string& path) {
  auto is = open_in(path, false);
  Manifest m;
  std::string line;
  while (std::getline(is, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t\r");
      const auto b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!key.empty()) m[key] = value;
  }
  return m;
}

namespace {

constexpr char kSignalsMagic[8] = {'C', 'O', 'D', 'I', 'S', 'S', 'I', 'G'};
constexpr char kStreamMagic[8] = {'C', 'O', 'D', 'I', 'S', 'S', 'T', 'R'};

void write_event(std::ostream& os, const EventGroundTruth& e) {
  write_f64(os, e.arrival_time);
  write_f64(os, e.diameter);
  write_f64(os, e.velocity);
  write_f64_array(os, e.peak_amplitudes.data(), 4);
  write_f64_array(os, e.tmpl.amplitude.data(), 4);
  write_f64_array(os, e.tmpl.shape.data(), 4);
  write_f64_array(os, e.tmpl.center.data(), 4);
  write_f64_array(os, e.tmpl.width.data(), 4);
}

EventGroundTruth read_event(std::istream& is) {
  EventGroundTruth e;
  e.arrival_time = read_f64(is);
  e.diameter = read_f64(is);
  e.velocity = read_f64(is);
  read_f64_array(is, e.peak_amplitudes.data(), 4);
  read_f64_array(is, e.tmpl.amplitude.data(), 4);
  read_f64_array(is, e.tmpl.shape.data(), 4);
  read_f64_array(is, e.tmpl.center.data(), 4);
  read_f64_array(is, e.tmpl.width.data(), 4);
  return e;
}

}  // namespace

void save_dataset(const std::string& dir, const DatasetMeta& meta,
                  const std::vector<LabeledSignal>& signals) {
  std::filesystem::create_directories(dir);
  std::ostringstream hist;
  for (int k = 0; k < 4; ++k) hist << (k ? "," : "") << meta.class_hist[static_cast<std::size_t>(k)];
  std::ostringstream fs_s, dist_s, seed_s;
  fs_s.precision(17);
  fs_s << meta.fs;
  dist_s.precision(17);
  dist_s << meta.sensing_distance;
  seed_s << meta.seed;
  write_manifest(dir + "/manifest.txt",
                 {{"format_version", "1"},
                  {"kind", "dataset"},
                  {"profile", meta.profile},
                  {"fs", fs_s.str()},
                  {"seed", seed_s.str()},
                  {"n_signals", std::to_string(signals.size())},
                  {"class_hist", hist.str()},
                  {"sensing_distance", dist_s.str()},
                  {"noise", meta.noise ? "1" : "0"}});

  auto os = open_out(dir + "/signals.bin");
  write_magic(os, kSignalsMagic);
  write_u32(os, 1);
  write_u64(os, signals.size());
  for (const auto& s : signals) {
    write_u64(os, s.waveform.samples.size());
    write_f64(os, s.waveform.sample_rate);
    write_f64(os, s.window_start);
    write_i32(os, s.count);
    write_u32(os, static_cast<std::uint32_t>(s.events.size()));
    write_f64_array(os, s.waveform.samples.data(), s.waveform.samples.size());
    for (const auto& e : s.events) write_event(os, e);
  }
  if (!os) throw std::runtime_error("write failed: " + dir + "/signals.bin");
}

std::pair<DatasetMeta, std::vector<LabeledSignal>> load_dataset(const std::string& dir) {
  const auto man = read_manifest(dir + "/manifest.txt");
  DatasetMeta meta;
  auto need = [&](const std::string& k) {
    const auto it = man.find(k);
    if (it == man.end()) throw std::runtime_error("dataset manifest missing key: " + k);
    return it->second;
  };
  meta.profile = need("profile");
  meta.fs = std::stod(need("fs"));
  meta.seed = std::stoull(need("seed"));
  meta.sensing_distance = std::stod(need("sensing_distance"));
  meta.noise = need("noise") == "1";
  {
    std::istringstream hist(need("class_hist"));
    std::string tok;
    for (int k = 0; k < 4 && std::getline(hist, tok, ','); ++k)
      meta.class_hist[static_cast<std::size_t>(k)] = std::stoull(tok);
  }

  auto is = open_in(dir + "/signals.bin");
  expect_magic(is, kSignalsMagic, "codis signals");
  const std::uint32_t version = read_u32(is);
  if (version != 1) throw std::runtime_error("unsupported signals.bin version");
  const std::uint64_t count = read_u64(is);
  std::vector<LabeledSignal> signals;
  signals.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    LabeledSignal s;
    const std::uint64_t n = read_u64(is);
    s.waveform.sample_rate = read_f64(is);
    s.window_start = read_f64(is);
    s.count = read_i32(is);
    const std::uint32_t ne = read_u32(is);
    s.waveform.samples.resize(n);
    read_f64_array(is, s.waveform.samples.data(), n);
    s.events.reserve(ne);
    for (std::uint32_t e = 0; e < ne; ++e) s.events.push_back(read_event(is));
    s.profile_name = meta.profile;
    signals.push_back(std::move(s));
  }
  return {meta, std::move(signals)};
}

void save_stream(const std::string& path, const Waveform& stream) {
  auto os = open_out(path);
  write_magic(os, kStreamMagic);
  write_u32(os, 1);
  write_f64(os, stream.sample_rate);
  write_u64(os, stream.samples.size());
  write_f64_array(os, stream.samples.data(), stream.samples.size());
  if (!os) throw std::runtime_error("write failed: " + path);
}

Waveform load_stream(const std::string& path) {
  auto is = open_in(path);
  expect_magic(is, kStreamMagic, "codis stream");
  const std::uint32_t version = read_u32(is);
  if (version != 1) throw std::runtime_error("unsupported stream version");
  Waveform w;
  w.sample_rate = read_f64(is);
  const std::uint64_t n = read_u64(is);
  w.samples.resize(n);
  read_f64_array(is, w.samples.data(), n);
  return w;
}

}  // namespace codis::io
