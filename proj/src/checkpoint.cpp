#include "grn/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <fstream>

#include "grn/errors.hpp"

namespace grn {

namespace {

constexpr const char* format_tag = "grn-checkpoint/1";

void write_blob(const std::filesystem::path& path, std::span<const double> values) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw ResolutionError("cannot write " + path.string());
    }
    for (const double v : values) {
        auto bits = std::bit_cast<std::uint64_t>(v);
        char bytes[8];
        for (auto& b : bytes) {
            b = static_cast<char>(bits & 0xffU);
            bits >>= 8;
        }
        out.write(bytes, 8);
    }
}

std::vector<double> read_blob(const std::filesystem::path& path, std::size_t count) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ResolutionError("missing checkpoint blob " + path.string());
    }
    std::vector<double> values(count);
    for (auto& v : values) {
        unsigned char bytes[8];
        if (!in.read(reinterpret_cast<char*>(bytes), 8)) {
            throw ParseError("truncated checkpoint blob " + path.string(), 0);
        }
        std::uint64_t bits = 0;
        for (int i = 7; i >= 0; --i) {
            bits = (bits << 8) | bytes[i];
        }
        v = std::bit_cast<double>(bits);
    }
    if (in.peek() != std::char_traits<char>::eof()) {
        throw ParseError("checkpoint blob " + path.string() + " is longer than its shape", 0);
    }
    return values;
}

} // namespace

const ad::Tensor& Checkpoint::at(const std::string& name) const {
    for (const auto& p : parameters) {
        if (p.name == name) {
            return p.tensor;
        }
    }
    throw CoverageError("checkpoint has no parameter '" + name + "'");
}

void save_checkpoint(const std::filesystem::path& dir, std::span<const NamedTensor> parameters,
                     const nlohmann::json& metadata) {
    std::filesystem::create_directories(dir);
    nlohmann::json manifest = metadata;
    manifest["format"] = format_tag;
    auto entries = nlohmann::json::array();
    for (const auto& p : parameters) {
        const std::string file = p.name + ".f64";
        write_blob(dir / file, p.tensor.data());
        entries.push_back({{"name", p.name}, {"shape", p.tensor.shape()}, {"file", file}});
    }
    manifest["parameters"] = std::move(entries);
    std::ofstream out(dir / "manifest.json", std::ios::trunc);
    if (!out) {
        throw ResolutionError("cannot write " + (dir / "manifest.json").string());
    }
    out << manifest.dump(2) << "\n";
}

Checkpoint load_checkpoint(const std::filesystem::path& dir) {
    std::ifstream in(dir / "manifest.json");
    if (!in) {
        throw ResolutionError("missing checkpoint manifest in " + dir.string());
    }
    Checkpoint ckpt;
    try {
        ckpt.manifest = nlohmann::json::parse(in);
        if (ckpt.manifest.value("format", std::string{}) != format_tag) {
            throw ParseError("unrecognized checkpoint format in " + dir.string(), 0);
        }
        for (const auto& entry : ckpt.manifest.at("parameters")) {
            auto shape = entry.at("shape").get<ad::Shape>();
            std::size_t count = 1;
            for (const auto d : shape) {
                count *= d;
            }
            auto values = read_blob(dir / entry.at("file").get<std::string>(), count);
            ckpt.parameters.push_back(
                NamedTensor{entry.at("name").get<std::string>(), ad::Tensor::from(std::move(shape), std::move(values))});
        }
    } catch (const nlohmann::json::exception& ex) {
        throw ParseError("malformed checkpoint manifest in " + dir.string() + ": " + ex.what(), 0);
    }
    return ckpt;
}

} // namespace grn
