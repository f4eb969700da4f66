// Copyright 2026 The CellOS Authors
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

#include <zlib.h>

#include <bit>

#include "cellos/error.hpp"
#include "cellos/runtime.hpp"

namespace cellos {

namespace {

void put(std::vector<std::uint8_t>& out, std::uint32_t v, int bytes) {
  for (int k = 0; k < bytes; ++k) out.push_back(static_cast<std::uint8_t>(v >> (8 * k)));
}

std::uint32_t get(std::span<const std::uint8_t> in, std::size_t at, int bytes) {
  std::uint32_t v = 0;
  for (int k = 0; k < bytes; ++k) v |= static_cast<std::uint32_t>(in[at + k]) << (8 * k);
  return v;
}

std::uint32_t checksum(const std::uint8_t* data, std::size_t size) {
  uLong crc = crc32(0L, Z_NULL, 0);
  return static_cast<std::uint32_t>(crc32(crc, data, static_cast<uInt>(size)));
}

}  // namespace

std::vector<std::uint8_t> encode(const X2Message& msg) {
  std::vector<std::uint8_t> out;
  out.reserve(kX2HeaderBytes + 4 * msg.payload.size() + kX2TrailerBytes);
  put(out, msg.sender, 2);
  put(out, msg.iteration, 4);
  put(out, static_cast<std::uint32_t>(msg.payload.size()), 4);
  for (float v : msg.payload) put(out, std::bit_cast<std::uint32_t>(v), 4);
  put(out, checksum(out.data(), out.size()), 4);
  return out;
}

X2Message decode(std::span<const std::uint8_t> frame) {
  if (frame.size() < kX2HeaderBytes + kX2TrailerBytes) throw MalformedMessage("frame shorter than header");
  X2Message msg;
  msg.sender = static_cast<std::uint16_t>(get(frame, 0, 2));
  msg.iteration = get(frame, 2, 4);
  std::size_t count = get(frame, 6, 4);
  if (frame.size() != kX2HeaderBytes + 4 * count + kX2TrailerBytes) {
    throw MalformedMessage("frame length does not match value count " + std::to_string(count));
  }
  std::size_t body = frame.size() - kX2TrailerBytes;
  if (checksum(frame.data(), body) != get(frame, body, 4)) {
    throw ChecksumMismatch("X2 frame from base station " + std::to_string(msg.sender));
  }
  msg.payload.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    msg.payload.push_back(std::bit_cast<float>(get(frame, kX2HeaderBytes + 4 * k, 4)));
  }
  return msg;
}

}  // namespace cellos
