#include "omar/io_util.hpp"

#include <algorithm>
#include <charconv>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "omar/errors.hpp"

namespace omar::io {

namespace {

// Host-endianness guard: block encodings are little-endian on disk.
bool host_is_little_endian() {
  const std::uint16_t probe = 0x1;
  char b;
  std::memcpy(&b, &probe, 1);
  return b == 1;
}

template <typename T>
void append_le(std::string& buf, T v) {
  char raw[sizeof(T)];
  std::memcpy(raw, &v, sizeof(T));
  if (!host_is_little_endian()) std::reverse(raw, raw + sizeof(T));
  buf.append(raw, sizeof(T));
}

template <typename T>
T read_le(const char* p) {
  char raw[sizeof(T)];
  std::memcpy(raw, p, sizeof(T));
  if (!host_is_little_endian()) std::reverse(raw, raw + sizeof(T));
  T v;
  std::memcpy(&v, raw, sizeof(T));
  return v;
}

}  // namespace

void BinaryWriter::u32(std::uint32_t v) { append_le(buf_, v); }
void BinaryWriter::u64(std::uint64_t v) { append_le(buf_, v); }

void BinaryWriter::f64(double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof(bits));
  append_le(buf_, bits);
}

void BinaryWriter::f64_block(const double* data, std::size_t count) {
  if (host_is_little_endian()) {
    buf_.append(reinterpret_cast<const char*>(data), count * sizeof(double));
  } else {
    for (std::size_t i = 0; i < count; ++i) f64(data[i]);
  }
}

void BinaryWriter::bytes(const std::string& s) { buf_.append(s); }

void BinaryWriter::tagged_string(const std::string& s) {
  u32(static_cast<std::uint32_t>(s.size()));
  buf_.append(s);
}

void BinaryReader::need(std::size_t n) const {
  if (pos_ + n > data_.size()) {
    throw IoError("truncated file while reading section '" + section_ +
                  "' (need " + std::to_string(n) + " bytes, have " +
                  std::to_string(data_.size() - pos_) + ")");
  }
}

std::uint8_t BinaryReader::u8() {
  need(1);
  return static_cast<std::uint8_t>(data_[pos_++]);
}

std::uint32_t BinaryReader::u32() {
  need(4);
  const auto v = read_le<std::uint32_t>(data_.data() + pos_);
  pos_ += 4;
  return v;
}

std::uint64_t BinaryReader::u64() {
  need(8);
  const auto v = read_le<std::uint64_t>(data_.data() + pos_);
  pos_ += 8;
  return v;
}

double BinaryReader::f64() {
  const std::uint64_t bits = u64();
  double v;
  std::memcpy(&v, &bits, sizeof(v));
  return v;
}

void BinaryReader::f64_block(double* out, std::size_t count) {
  need(count * sizeof(double));
  if (host_is_little_endian()) {
    std::memcpy(out, data_.data() + pos_, count * sizeof(double));
    pos_ += count * sizeof(double);
  } else {
    for (std::size_t i = 0; i < count; ++i) out[i] = f64();
  }
}

std::string BinaryReader::tagged_string() {
  const std::uint32_t len = u32();
  need(len);
  std::string s = data_.substr(pos_, len);
  pos_ += len;
  return s;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  if (!in.good() && !in.eof()) throw IoError("read failed: " + path);
  return ss.str();
}

void ensure_parent_dir(const std::string& path) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
}

void write_file_atomic(const std::string& path, const std::string& contents) {
  ensure_parent_dir(path);
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot create file: " + tmp);
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw IoError("write failed: " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  if (res.ec != std::errc()) throw IoError("double formatting failed");
  return std::string(buf, res.ptr);
}

std::string csv_row(const std::vector<std::string>& fields) {
  std::string row;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) row += ',';
    row += fields[i];
  }
  row += '\n';
  return row;
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      const auto comma = line.find(',', start);
      if (comma == std::string::npos) {
        fields.push_back(line.substr(start));
        break;
      }
      fields.push_back(line.substr(start, comma - start));
      start = comma + 1;
    }
    rows.push_back(std::move(fields));
  }
  return rows;
}

}  // namespace omar::io
