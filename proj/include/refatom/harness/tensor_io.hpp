#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace refatom::harness {

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Dense float64 tensor in the sidecar "RTEN" layout:
///   "RTEN" | u32 version | u32 rank | u32 dims[rank] | f64 data (row-major)
/// All integers and floats little-endian.
struct Tensor {
  std::vector<std::uint32_t> dims;
  std::vector<double> data;

  std::size_t element_count() const;
  bool operator==(const Tensor&) const = default;
};

inline constexpr std::uint32_t kTensorFormatVersion = 1;

void write_tensor(std::ostream& out, const Tensor& t);
Tensor read_tensor(std::istream& in, const std::string& what = "tensor");

void save_tensor(const std::filesystem::path& path, const Tensor& t);
Tensor load_tensor(const std::filesystem::path& path);

// Little-endian primitives shared with the checkpoint writer.
void put_u32(std::ostream& out, std::uint32_t v);
void put_f64(std::ostream& out, double v);
std::uint32_t get_u32(std::istream& in);
double get_f64(std::istream& in);

}  // namespace refatom::harness
