#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace omar::io {

// Little-endian binary writer backed by a growing byte buffer.
class BinaryWriter {
 public:
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f64(double v);
  void f64_block(const double* data, std::size_t count);
  void bytes(const std::string& s);
  void tagged_string(const std::string& s);  // u32 length + utf-8 bytes

  const std::string& buffer() const { return buf_; }

 private:
  std::string buf_;
};

// Little-endian binary reader over an in-memory buffer. Throws IoError with
// the current section name on truncation.
class BinaryReader {
 public:
  explicit BinaryReader(std::string data) : data_(std::move(data)) {}

  void section(const std::string& name) { section_ = name; }
  const std::string& section() const { return section_; }

  std::uint8_t u8();
  std::uint32_t u32();
  std::uint64_t u64();
  double f64();
  void f64_block(double* out, std::size_t count);
  std::string tagged_string();

  std::size_t remaining() const { return data_.size() - pos_; }
  bool at_end() const { return pos_ == data_.size(); }

 private:
  void need(std::size_t n) const;

  std::string data_;
  std::size_t pos_ = 0;
  std::string section_ = "header";
};

// Whole-file helpers. write_file_atomic writes to a temp sibling and renames
// so readers never observe a partial file.
std::string read_file(const std::string& path);
void write_file_atomic(const std::string& path, const std::string& contents);
void ensure_parent_dir(const std::string& path);

// Shortest round-trip decimal form of a double (stable across runs).
std::string format_double(double v);

// Minimal CSV support: fields must not contain commas or newlines.
std::string csv_row(const std::vector<std::string>& fields);
std::vector<std::vector<std::string>> parse_csv(const std::string& text);

}  // namespace omar::io
