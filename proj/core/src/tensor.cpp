#include "certdw/tensor.hpp"

#include <algorithm>

#include "certdw/error.hpp"

namespace certdw {

std::string Shape::to_string() const {
  return std::to_string(channels) + "x" + std::to_string(height) + "x" + std::to_string(width);
}

ImageTensor::ImageTensor(Shape s, std::vector<double> v) : shape(s), values(std::move(v)) {
  if (values.size() != shape.size()) {
    throw DomainError("ImageTensor: " + std::to_string(values.size()) + " values for shape " +
                      shape.to_string());
  }
}

void require_shape(const ImageTensor& x, const Shape& expected, const char* where) {
  if (x.shape != expected || x.values.size() != expected.size()) {
    throw DomainError(std::string(where) + ": shape mismatch (got " + x.shape.to_string() +
                      ", expected " + expected.to_string() + ")");
  }
}

void clip_unit(std::span<double> values) {
  for (double& v : values) {
    v = std::clamp(v, 0.0, 1.0);
  }
}

}  // namespace certdw
