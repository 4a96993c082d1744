// Copyright 2026 The zkml Authors
// Licensed under the Apache License, Version 2.0, see LICENSE for details.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace zkml::util {

std::string base64_encode(const uint8_t* data, size_t n);
/// Throws FormatError on malformed input.
std::vector<uint8_t> base64_decode(std::string_view text);

std::array<uint8_t, 32> sha256(const void* data, size_t n);
std::string sha256_hex(std::string_view data);
std::string to_hex(const uint8_t* data, size_t n);
std::vector<uint8_t> from_hex(std::string_view hex);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

}  // namespace zkml::util
