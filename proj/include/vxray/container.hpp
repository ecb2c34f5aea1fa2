// Copyright Contributors to the vxray Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "vxray/tensor.hpp"

namespace vxray {

class CheckpointError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

inline constexpr char kContainerMagic[4] = {'V', 'X', 'R', 'Y'};
inline constexpr uint32_t kContainerVersion = 1;

/// Tagged-section file: magic "VXRY", u32 version, u32 section count, then
/// per section a name, a dtype tag, a shape and a little-endian payload.
class Container {
  public:
    enum class Dtype : uint8_t { F32 = 0, U64 = 1, Bytes = 2 };

    struct Section {
        std::string name;
        Dtype dtype = Dtype::F32;
        Shape shape;
        std::vector<float> f32;
        std::vector<uint64_t> u64;
        std::string bytes;
    };

    void put(const std::string& name, const Tensor<float>& t);
    void put_u64(const std::string& name, std::vector<uint64_t> words);
    void put_bytes(const std::string& name, std::string bytes);

    bool has(const std::string& name) const { return find(name) != nullptr; }
    const Section* find(const std::string& name) const;
    /// Throws CheckpointError when missing, of another dtype, or (if given) of another shape.
    Tensor<float> tensor(const std::string& name, const Shape* expected = nullptr) const;
    const std::vector<uint64_t>& u64(const std::string& name) const;
    const std::string& bytes(const std::string& name) const;
    std::vector<std::string> names_with_prefix(const std::string& prefix) const;

    const std::vector<Section>& sections() const { return sections_; }

    std::string serialize() const;
    static Container deserialize(const std::string& data);

    /// Writes to a temporary file in the same directory, then renames.
    void save(const std::filesystem::path& path) const;
    static Container load(const std::filesystem::path& path);

  private:
    Section& slot(const std::string& name);
    const Section& require(const std::string& name, Dtype dtype) const;
    std::vector<Section> sections_;
};

}  // namespace vxray
