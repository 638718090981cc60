// SPDX-License-Identifier: Apache-2.0

#include <cstring>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "msmatch/io/io.hpp"

namespace msmatch::io {

namespace fs = std::filesystem;

void save_npy(const fs::path& path, const Tensor& t) {
    std::string shape = "(";
    for (size_t i = 0; i < t.rank(); ++i) shape += std::to_string(t.shape()[i]) + ",";
    if (t.rank() > 1) shape.pop_back();
    shape += ")";
    std::string header =
        "{'descr': '<f8', 'fortran_order': False, 'shape': " + shape + ", }";
    const size_t base = 10;  // magic + version + header-length field
    const size_t padded = ((base + header.size() + 1 + 63) / 64) * 64;
    header.resize(padded - base - 1, ' ');
    header += '\n';

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    const uint16_t hlen = static_cast<uint16_t>(header.size());
    f.write("\x93NUMPY\x01\x00", 8);
    f.write(reinterpret_cast<const char*>(&hlen), 2);
    f.write(header.data(), static_cast<std::streamsize>(header.size()));
    f.write(reinterpret_cast<const char*>(t.data()),
            static_cast<std::streamsize>(t.numel() * 8));
}

Tensor load_npy(const fs::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot read " + path.string());
    char magic[8];
    f.read(magic, 8);
    if (std::memcmp(magic, "\x93NUMPY", 6) != 0)
        throw std::runtime_error("not an npy file: " + path.string());
    uint16_t hlen = 0;
    f.read(reinterpret_cast<char*>(&hlen), 2);
    std::string header(hlen, '\0');
    f.read(header.data(), hlen);
    if (header.find("'<f8'") == std::string::npos)
        throw std::runtime_error("npy dtype must be <f8: " + path.string());
    const auto lp = header.find('(');
    const auto rp = header.find(')');
    std::vector<int64_t> shape;
    std::string inside = header.substr(lp + 1, rp - lp - 1);
    size_t pos = 0;
    while (pos < inside.size()) {
        size_t end = inside.find(',', pos);
        if (end == std::string::npos) end = inside.size();
        const std::string tok = inside.substr(pos, end - pos);
        if (tok.find_first_of("0123456789") != std::string::npos)
            shape.push_back(std::stoll(tok));
        pos = end + 1;
    }
    Tensor t(shape);
    f.read(reinterpret_cast<char*>(t.data()),
           static_cast<std::streamsize>(t.numel() * 8));
    if (!f) throw std::runtime_error("truncated npy file: " + path.string());
    return t;
}

uint64_t fnv1a(const void* data, size_t n, uint64_t seed) {
    const unsigned char* p = static_cast<const unsigned char*>(data);
    uint64_t h = seed;
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

uint64_t fnv1a(const std::string& s) { return fnv1a(s.data(), s.size()); }

std::string hash_hex(uint64_t h) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void write_text_atomic(const fs::path& path, const std::string& content) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw std::runtime_error("cannot write " + tmp.string());
        f.write(content.data(), static_cast<std::streamsize>(content.size()));
    }
    fs::rename(tmp, path);
}

std::string read_text(const fs::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot read " + path.string());
    return std::string(std::istreambuf_iterator<char>(f), {});
}

namespace {
nlohmann::json tensor_index(const NamedTensors& ts) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& [name, t] : ts) {
        nlohmann::json e;
        e["name"] = name;
        e["shape"] = t.shape();
        arr.push_back(e);
    }
    return arr;
}

NamedTensors read_section(std::ifstream& f, const nlohmann::json& index) {
    NamedTensors out;
    for (const auto& e : index) {
        Tensor t(e.at("shape").get<std::vector<int64_t>>());
        f.read(reinterpret_cast<char*>(t.data()),
               static_cast<std::streamsize>(t.numel() * 8));
        out.emplace_back(e.at("name").get<std::string>(), std::move(t));
    }
    return out;
}
}  // namespace

void save_checkpoint(const fs::path& path, const Checkpoint& c) {
    nlohmann::json header;
    header["format"] = "msmatch-checkpoint-v1";
    header["model_config"] = nlohmann::json::parse(c.model_config_json);
    header["step"] = c.step;
    header["manifest_hash"] = c.manifest_hash;
    header["params"] = tensor_index(c.params);
    header["buffers"] = tensor_index(c.buffers);
    header["optimizer"] = tensor_index(c.optimizer);
    const std::string htext = header.dump();

    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw std::runtime_error("cannot write " + tmp.string());
        f.write("MSMCKPT1", 8);
        const uint64_t hlen = htext.size();
        f.write(reinterpret_cast<const char*>(&hlen), 8);
        f.write(htext.data(), static_cast<std::streamsize>(htext.size()));
        for (const NamedTensors* section : {&c.params, &c.buffers, &c.optimizer})
            for (const auto& [name, t] : *section)
                f.write(reinterpret_cast<const char*>(t.data()),
                        static_cast<std::streamsize>(t.numel() * 8));
    }
    fs::rename(tmp, path);
}

Checkpoint load_checkpoint(const fs::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot read checkpoint " + path.string());
    char magic[8];
    f.read(magic, 8);
    if (std::memcmp(magic, "MSMCKPT1", 8) != 0)
        throw std::runtime_error("not a checkpoint file: " + path.string());
    uint64_t hlen = 0;
    f.read(reinterpret_cast<char*>(&hlen), 8);
    std::string htext(hlen, '\0');
    f.read(htext.data(), static_cast<std::streamsize>(hlen));
    const auto header = nlohmann::json::parse(htext);

    Checkpoint c;
    c.model_config_json = header.at("model_config").dump();
    c.step = header.at("step").get<int64_t>();
    c.manifest_hash = header.at("manifest_hash").get<uint64_t>();
    c.params = read_section(f, header.at("params"));
    c.buffers = read_section(f, header.at("buffers"));
    c.optimizer = read_section(f, header.at("optimizer"));
    if (!f) throw std::runtime_error("truncated checkpoint: " + path.string());
    return c;
}

}  // namespace msmatch::io
