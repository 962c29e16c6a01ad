// Copyright 2026 The phocnet-cpp Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef PHOCNET_IMAGE_IO_HPP_
#define PHOCNET_IMAGE_IO_HPP_

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "phocnet/tensor.hpp"

namespace phocnet {

class ImageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Binary PGM (P5, maxval up to 65535) or 8-bit grayscale PNG. Samples are
/// scaled by maxval to [0, 1] and inverted so ink is high and paper is 0.
Tensor<float> load_image(const std::filesystem::path& path);
Tensor<float> decode_image(std::span<const std::uint8_t> bytes, const std::string& name = "image");

/// Writes P5 with maxval 255: byte = round((1 - v) * 255).
void save_pgm(const Tensor<float>& image, const std::filesystem::path& path);
std::vector<std::uint8_t> encode_pgm(const Tensor<float>& image);

}  // namespace phocnet

#endif  // PHOCNET_IMAGE_IO_HPP_
