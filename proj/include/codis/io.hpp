#ifndef CODIS_IO_HPP
#define CODIS_IO_HPP

#include <cstdint>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "codis/types.hpp"

namespace codis::io {

// Little-endian primitives, host-order independent.
void write_u32(std::ostream& os, std::uint32_t v);
void write_u64(std::ostream& os, std::uint64_t v);
void write_i32(std::ostream& os, std::int32_t v);
void write_f64(std::ostream& os, double v);
void write_f64_array(std::ostream& os, const double* p, std::size_t n);
std::uint32_t read_u32(std::istream& is);
std::uint64_t read_u64(std::istream& is);
std::int32_t read_i32(std::istream& is);
double read_f64(std::istream& is);
void read_f64_array(std::istream& is, double* p, std::size_t n);
void write_magic(std::ostream& os, const char magic[8]);
void expect_magic(std::istream& is, const char magic[8], const std::string& what);

// UTF-8 "key = value" manifest, one entry per line, '#' comments.
using Manifest = std::map<std::string, std::string>;
void write_manifest(const std::string& path, const std::vector<std::pair<std::string, std::string>>& entries);
Manifest read_manifest(const std::string& path);

// Dataset directory: manifest.txt plus signals.bin with one framed record per
// signal (samples as little-endian 64-bit floats, count, ground-truth events).
struct DatasetMeta {
  std::string profile;
  double fs = 0.0;
  std::uint64_t seed = 0;
  std::array<std::uint64_t, 4> class_hist{};
  double sensing_distance = 0.0;  // meters, for velocity inference downstream
  bool noise = true;
};

void save_dataset(const std::string& dir, const DatasetMeta& meta,
                  const std::vector<LabeledSignal>& signals);
std::pair<DatasetMeta, std::vector<LabeledSignal>> load_dataset(const std::string& dir);

// Raw single-channel stream: 64-bit float volts with a sample-rate header.
void save_stream(const std::string& path, const Waveform& stream);
Waveform load_stream(const std::string& path);

std::ofstream open_out(const std::string& path, bool binary = true);
std::ifstream open_in(const std::string& path, bool binary = true);

}  // namespace codis::io

#endif
