#include "neuralign/binio.hpp"

#include <openssl/evp.h>

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>

#include "neuralign/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "binary formats are little-endian; big-endian hosts are unsupported");

namespace neuralign {

std::vector<std::uint8_t> read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in)
    throw IoError(IoError::Kind::file, "cannot open " + p.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad())
    throw IoError(IoError::Kind::file, "read failed for " + p.string());
  return bytes;
}

void write_file_atomic(const std::filesystem::path& p, const void* data,
                       std::size_t size) {
  const std::filesystem::path tmp = p.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(IoError::Kind::file, "cannot create " + tmp.string());
    out.write(static_cast<const char*>(data), std::streamsize(size));
    if (!out) {
      out.close();
      std::filesystem::remove(tmp);
      throw IoError(IoError::Kind::file, "write failed for " + tmp.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, p, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw IoError(IoError::Kind::file, "rename failed for " + p.string());
  }
}

void write_text_atomic(const std::filesystem::path& p, const std::string& text) {
  write_file_atomic(p, text.data(), text.size());
}

std::string sha256_hex(const void* data, std::size_t size) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data, size, digest, &len, EVP_sha256(), nullptr) != 1)
    throw IoError(IoError::Kind::file, "sha256 computation failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xF]);
  }
  return out;
}

std::string sha256_hex(const std::vector<std::uint8_t>& bytes) {
  return sha256_hex(bytes.data(), bytes.size());
}

std::vector<std::uint8_t> matrix_to_f32_bytes(const Matrix& m) {
  std::vector<std::uint8_t> out(m.size() * sizeof(float));
  auto* dst = reinterpret_cast<float*>(out.data());
  for (std::size_t i = 0; i < m.size(); ++i) dst[i] = static_cast<float>(m.data[i]);
  return out;
}

Matrix matrix_from_f32_bytes(const std::vector<std::uint8_t>& bytes, std::size_t rows,
                             std::size_t cols) {
  if (bytes.size() != rows * cols * sizeof(float))
    throw IoError(IoError::Kind::format, "binary length does not match declared shape");
  Matrix m(rows, cols);
  const auto* src = reinterpret_cast<const float*>(bytes.data());
  for (std::size_t i = 0; i < m.size(); ++i) m.data[i] = double(src[i]);
  return m;
}

void append_f64_bytes(std::vector<std::uint8_t>& out, const Matrix& m) {
  const std::size_t off = out.size();
  out.resize(off + m.size() * sizeof(double));
  std::memcpy(out.data() + off, m.data.data(), m.size() * sizeof(double));
}

Matrix matrix_from_f64_bytes(const std::uint8_t* data, std::size_t rows,
                             std::size_t cols) {
  Matrix m(rows, cols);
  std::memcpy(m.data.data(), data, rows * cols * sizeof(double));
  return m;
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace neuralign
