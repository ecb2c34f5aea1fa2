// Copyright Contributors to the vxray Project
// SPDX-License-Identifier: Apache-2.0

#include "vxray/container.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace vxray {

static_assert(std::endian::native == std::endian::little, "container I/O assumes a little-endian host");

namespace {

template <typename V>
void put_raw(std::string& out, const V& v) {
    out.append(reinterpret_cast<const char*>(&v), sizeof(V));
}

class Reader {
  public:
    explicit Reader(const std::string& data) : data_(data) {}

    template <typename V>
    V get() {
        V v;
        take(&v, sizeof(V));
        return v;
    }
    void take(void* dst, size_t n) {
        if (n > data_.size() - pos_) throw CheckpointError("truncated checkpoint");
        std::memcpy(dst, data_.data() + pos_, n);
        pos_ += n;
    }
    bool done() const { return pos_ == data_.size(); }

  private:
    const std::string& data_;
    size_t pos_ = 0;
};

}  // namespace

Container::Section& Container::slot(const std::string& name) {
    for (auto& s : sections_) {
        if (s.name == name) {
            s = Section{};
            s.name = name;
            return s;
        }
    }
    sections_.push_back(Section{});
    sections_.back().name = name;
    return sections_.back();
}

void Container::put(const std::string& name, const Tensor<float>& t) {
    Section& s = slot(name);
    s.dtype = Dtype::F32;
    s.shape = t.shape();
    s.f32.assign(t.data().begin(), t.data().end());
}

void Container::put_u64(const std::string& name, std::vector<uint64_t> words) {
    Section& s = slot(name);
    s.dtype = Dtype::U64;
    s.shape = {static_cast<int64_t>(words.size())};
    s.u64 = std::move(words);
}

void Container::put_bytes(const std::string& name, std::string bytes) {
    Section& s = slot(name);
    s.dtype = Dtype::Bytes;
    s.shape = {static_cast<int64_t>(bytes.size())};
    s.bytes = std::move(bytes);
}

const Container::Section* Container::find(const std::string& name) const {
    for (const auto& s : sections_)
        if (s.name == name) return &s;
    return nullptr;
}

const Container::Section& Container::require(const std::string& name, Dtype dtype) const {
    const Section* s = find(name);
    if (!s) throw CheckpointError("checkpoint has no section '" + name + "'");
    if (s->dtype != dtype) throw CheckpointError("section '" + name + "' has an unexpected type");
    return *s;
}

Tensor<float> Container::tensor(const std::string& name, const Shape* expected) const {
    const Section& s = require(name, Dtype::F32);
    if (expected && *expected != s.shape) {
        throw CheckpointError("section '" + name + "' has shape " + shape_str(s.shape) +
                              ", expected " + shape_str(*expected));
    }
    return Tensor<float>(s.shape, s.f32);
}

const std::vector<uint64_t>& Container::u64(const std::string& name) const {
    return require(name, Dtype::U64).u64;
}

const std::string& Container::bytes(const std::string& name) const {
    return require(name, Dtype::Bytes).bytes;
}

std::vector<std::string> Container::names_with_prefix(const std::string& prefix) const {
    std::vector<std::string> out;
    for (const auto& s : sections_)
        if (s.name.compare(0, prefix.size(), prefix) == 0) out.push_back(s.name);
    return out;
}

std::string Container::serialize() const {
    std::string out(kContainerMagic, 4);
    put_raw(out, kContainerVersion);
    put_raw(out, static_cast<uint32_t>(sections_.size()));
    for (const auto& s : sections_) {
        put_raw(out, static_cast<uint32_t>(s.name.size()));
        out += s.name;
        put_raw(out, static_cast<uint8_t>(s.dtype));
        put_raw(out, static_cast<uint32_t>(s.shape.size()));
        for (int64_t d : s.shape) put_raw(out, static_cast<uint64_t>(d));
        switch (s.dtype) {
            case Dtype::F32:
                out.append(reinterpret_cast<const char*>(s.f32.data()), s.f32.size() * sizeof(float));
                break;
            case Dtype::U64:
                out.append(reinterpret_cast<const char*>(s.u64.data()), s.u64.size() * sizeof(uint64_t));
                break;
            case Dtype::Bytes:
                out += s.bytes;
                break;
        }
    }
    return out;
}

Container Container::deserialize(const std::string& data) {
    if (data.size() < 4 || std::memcmp(data.data(), kContainerMagic, 4) != 0) {
        throw CheckpointError("not a checkpoint (bad magic)");
    }
    Reader in(data);
    char magic[4];
    in.take(magic, 4);
    const auto version = in.get<uint32_t>();
    if (version != kContainerVersion) {
        throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
    }
    const auto count = in.get<uint32_t>();
    Container c;
    for (uint32_t i = 0; i < count; ++i) {
        Section s;
        s.name.resize(in.get<uint32_t>());
        in.take(s.name.data(), s.name.size());
        const auto tag = in.get<uint8_t>();
        if (tag > static_cast<uint8_t>(Dtype::Bytes)) throw CheckpointError("unknown section type in '" + s.name + "'");
        s.dtype = static_cast<Dtype>(tag);
        const auto rank = in.get<uint32_t>();
        if (rank > 8) throw CheckpointError("corrupt shape in section '" + s.name + "'");
        uint64_t n = 1;
        for (uint32_t r = 0; r < rank; ++r) {
            const auto d = in.get<uint64_t>();
            if (d > (uint64_t{1} << 40)) throw CheckpointError("corrupt shape in section '" + s.name + "'");
            s.shape.push_back(static_cast<int64_t>(d));
            n *= d;
        }
        if (n > data.size()) throw CheckpointError("truncated checkpoint");
        switch (s.dtype) {
            case Dtype::F32:
                s.f32.resize(n);
                in.take(s.f32.data(), n * sizeof(float));
                break;
            case Dtype::U64:
                s.u64.resize(n);
                in.take(s.u64.data(), n * sizeof(uint64_t));
                break;
            case Dtype::Bytes:
                s.bytes.resize(n);
                in.take(s.bytes.data(), n);
                break;
        }
        c.sections_.push_back(std::move(s));
    }
    if (!in.done()) throw CheckpointError("trailing bytes after checkpoint sections");
    return c;
}

void Container::save(const std::filesystem::path& path) const {
    const std::string data = serialize();
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw CheckpointError("cannot write " + tmp.string());
        out.write(data.data(), static_cast<std::streamsize>(data.size()));
        if (!out) throw CheckpointError("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

Container Container::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError("cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    try {
        return deserialize(buf.str());
    } catch (const CheckpointError& e) {
        throw CheckpointError(path.string() + ": " + e.what());
    }
}

}  // namespace vxray
