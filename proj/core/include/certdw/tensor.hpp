#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace certdw {

using Label = std::uint32_t;

/// Channel-major image geometry (C, H, W).
struct Shape {
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;

  std::size_t size() const noexcept { return channels * height * width; }
  std::size_t index(std::size_t c, std::size_t row, std::size_t col) const noexcept {
    return (c * height + row) * width + col;
  }
  std::string to_string() const;

  friend bool operator==(const Shape&, const Shape&) = default;
};

/// A C x H x W image stored flat in C-order. Pixel intensities nominally lie
/// in [0, 1]; noisy and perturbed copies may leave that range.
struct ImageTensor {
  Shape shape;
  std::vector<double> values;

  ImageTensor() = default;
  explicit ImageTensor(Shape s, double fill = 0.0) : shape(s), values(s.size(), fill) {}
  ImageTensor(Shape s, std::vector<double> v);

  std::span<const double> view() const noexcept { return values; }
  std::span<double> view() noexcept { return values; }

  friend bool operator==(const ImageTensor&, const ImageTensor&) = default;
};

/// Throws DomainError if the tensor does not have the expected shape.
void require_shape(const ImageTensor& x, const Shape& expected, const char* where);

void clip_unit(std::span<double> values);

}  // namespace certdw
