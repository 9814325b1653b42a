// Copyright 2026 The antforge Authors.
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

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "antforge/nets.hpp"

namespace antforge {

namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

constexpr char kMagic[4] = {'A', 'N', 'T', 'C'};

template <typename U>
void put(std::string& buf, U v) {
  char bytes[sizeof(U)];
  std::memcpy(bytes, &v, sizeof(U));
  buf.append(bytes, sizeof(U));
}

class Reader {
 public:
  Reader(const std::string& buf, const std::filesystem::path& path) : buf_(buf), path_(path) {}

  template <typename U>
  U get() {
    U v;
    need(sizeof(U));
    std::memcpy(&v, buf_.data() + pos_, sizeof(U));
    pos_ += sizeof(U);
    return v;
  }

  std::string bytes(size_t n) {
    need(n);
    std::string s = buf_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  void read_into(void* dst, size_t n) {
    need(n);
    std::memcpy(dst, buf_.data() + pos_, n);
    pos_ += n;
  }

  size_t remaining() const { return buf_.size() - pos_; }

 private:
  void need(size_t n) const {
    if (buf_.size() - pos_ < n) {
      throw TruncatedCheckpointError("checkpoint " + path_.string() + " is truncated");
    }
  }

  const std::string& buf_;
  const std::filesystem::path& path_;
  size_t pos_ = 0;
};

}  // namespace

uint64_t checkpoint_size(const ParamSet& params) {
  uint64_t n = 4 + 4 + 8 + 4;
  for (const auto& e : params.entries()) {
    n += 4 + e.name.size() + 4 + 8 * e.tensor.rank() + 4 * static_cast<uint64_t>(e.tensor.numel());
  }
  return n;
}

void save_checkpoint(const ParamSet& params, const std::filesystem::path& path) {
  std::string buf;
  buf.reserve(checkpoint_size(params));
  buf.append(kMagic, 4);
  put<uint32_t>(buf, kCheckpointVersion);
  put<uint64_t>(buf, params.fingerprint());
  put<uint32_t>(buf, static_cast<uint32_t>(params.size()));
  for (const auto& e : params.entries()) {
    put<uint32_t>(buf, static_cast<uint32_t>(e.name.size()));
    buf.append(e.name);
    put<uint32_t>(buf, static_cast<uint32_t>(e.tensor.rank()));
    for (int64_t d : e.tensor.shape()) put<uint64_t>(buf, static_cast<uint64_t>(d));
    buf.append(reinterpret_cast<const char*>(e.tensor.ptr()), sizeof(float) * e.tensor.numel());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot open " + path.string() + " for writing");
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw CheckpointError("failed writing " + path.string());
}

ParamSet load_checkpoint(const std::filesystem::path& path, std::optional<uint64_t> expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  const std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  Reader r(buf, path);
  if (r.bytes(4) != std::string(kMagic, 4)) {
    throw CheckpointError(path.string() + " is not an antforge checkpoint (bad magic)");
  }
  const auto version = r.get<uint32_t>();
  if (version != kCheckpointVersion) {
    throw VersionMismatchError("checkpoint version " + std::to_string(version) + ", expected " +
                               std::to_string(kCheckpointVersion));
  }
  const auto fingerprint = r.get<uint64_t>();
  if (expected && *expected != fingerprint) {
    throw FingerprintMismatchError("checkpoint " + path.string() +
                                   " was written for a different architecture");
  }
  ParamSet params(fingerprint);
  const auto count = r.get<uint32_t>();
  for (uint32_t t = 0; t < count; ++t) {
    const auto name_len = r.get<uint32_t>();
    std::string name = r.bytes(name_len);
    const auto rank = r.get<uint32_t>();
    if (rank > 8) throw CheckpointError("implausible tensor rank in " + path.string());
    Shape shape;
    for (uint32_t d = 0; d < rank; ++d) shape.push_back(static_cast<int64_t>(r.get<uint64_t>()));
    const int64_t n = numel(shape);
    if (n < 0 || static_cast<uint64_t>(n) * 4 > r.remaining()) {
      throw TruncatedCheckpointError("checkpoint " + path.string() + " is truncated");
    }
    TensorF tensor(shape);
    r.read_into(tensor.ptr(), sizeof(float) * static_cast<size_t>(n));
    tensor.set_requires_grad(true);
    params.add(std::move(name), std::move(tensor));
  }
  if (r.remaining() != 0) throw CheckpointError("trailing bytes in checkpoint " + path.string());
  return params;
}

}  // namespace antforge
