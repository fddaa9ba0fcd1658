#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "neuralign/matrix.hpp"

namespace neuralign {

// Raw file helpers. Writers go through a temp file + rename so a failed run
// never leaves a partial file behind without a marker.
std::vector<std::uint8_t> read_file(const std::filesystem::path& p);
void write_file_atomic(const std::filesystem::path& p,
                       const void* data, std::size_t size);
void write_text_atomic(const std::filesystem::path& p, const std::string& text);

std::string sha256_hex(const void* data, std::size_t size);
std::string sha256_hex(const std::vector<std::uint8_t>& bytes);

// Little-endian, row-major, headerless payloads.
std::vector<std::uint8_t> matrix_to_f32_bytes(const Matrix& m);
Matrix matrix_from_f32_bytes(const std::vector<std::uint8_t>& bytes,
                             std::size_t rows, std::size_t cols);

void append_f64_bytes(std::vector<std::uint8_t>& out, const Matrix& m);
Matrix matrix_from_f64_bytes(const std::uint8_t* data, std::size_t rows,
                             std::size_t cols);

// Shortest round-trip decimal form, locale-independent.
std::string format_double(double v);

}  // namespace neuralign
