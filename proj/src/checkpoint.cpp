#include "dsrn/checkpoint.hpp"

#include "dsrn/config_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>

namespace dsrn {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'D', 'S', 'R', 'N', 'C', 'K', 'P', 'T'};
constexpr std::uint8_t kDtypeF32 = 0;

class Writer {
public:
    template <typename V>
    void pod(const V& v) {
        bytes(&v, sizeof v);
    }
    void bytes(const void* p, std::size_t n) {
        const auto* c = static_cast<const char*>(p);
        buf_.insert(buf_.end(), c, c + n);
    }
    std::vector<char>& buffer() { return buf_; }

private:
    std::vector<char> buf_;
};

class Reader {
public:
    Reader(const char* p, std::size_t n) : p_(p), n_(n) {}
    template <typename V>
    V pod() {
        V v;
        bytes(&v, sizeof v);
        return v;
    }
    void bytes(void* out, std::size_t n) {
        if (n > n_ - pos_) fail(ErrorCode::corrupt, "checkpoint is truncated");
        std::memcpy(out, p_ + pos_, n);
        pos_ += n;
    }
    bool done() const { return pos_ == n_; }

private:
    const char* p_;
    std::size_t n_;
    std::size_t pos_ = 0;
};

nlohmann::json metadata(const Checkpoint& c) {
    nlohmann::json j;
    j["arch"] = c.model.arch();
    j["train"] = c.config;
    j["stage"] = c.stage;
    j["step"] = c.step;
    j["best_val_psnr"] = c.best_val_psnr;
    if (c.task) j["task"] = *c.task;
    if (c.target) j["target"] = *c.target;
    return j;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
    Writer w;
    w.bytes(kMagic, sizeof kMagic);
    w.pod(kCheckpointVersion);
    const std::string meta = metadata(ckpt).dump();
    w.pod(std::uint64_t(meta.size()));
    w.bytes(meta.data(), meta.size());

    std::uint32_t count = 0;
    ckpt.model.visit(ConstParamVisitor<float>([&](const std::string&, const Parameter<float>&) { ++count; }));
    w.pod(count);
    ckpt.model.visit(ConstParamVisitor<float>([&](const std::string& name, const Parameter<float>& p) {
        w.pod(std::uint32_t(name.size()));
        w.bytes(name.data(), name.size());
        w.pod(kDtypeF32);
        w.pod(std::uint32_t(p.shape.size()));
        for (int d : p.shape) w.pod(std::uint64_t(d));
        w.bytes(p.value.data(), p.value.size() * sizeof(float));
    }));
    const std::uint64_t sum = fnv1a64(w.buffer().data(), w.buffer().size());
    w.pod(sum);

    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) fail(ErrorCode::io, "cannot write checkpoint " + path.string());
        out.write(w.buffer().data(), std::streamsize(w.buffer().size()));
        if (!out) fail(ErrorCode::io, "short write to " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) fail(ErrorCode::io, "cannot move checkpoint into place: " + ec.message());
}

namespace {

Checkpoint load_impl(const std::filesystem::path& path, const ArchConfig* expected) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::io, "cannot open checkpoint " + path.string());
    std::vector<char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    if (buf.size() < sizeof kMagic + 4 || std::memcmp(buf.data(), kMagic, sizeof kMagic) != 0)
        fail(ErrorCode::corrupt, path.string() + " is not a checkpoint");
    std::uint32_t version;
    std::memcpy(&version, buf.data() + sizeof kMagic, 4);
    if (version != kCheckpointVersion)
        fail(ErrorCode::version, "checkpoint version " + std::to_string(version) + " is not supported (expected " +
                                     std::to_string(kCheckpointVersion) + ")");
    if (buf.size() < sizeof kMagic + 4 + 8 + 8) fail(ErrorCode::corrupt, "checkpoint is truncated");
    std::uint64_t stored;
    std::memcpy(&stored, buf.data() + buf.size() - 8, 8);
    if (fnv1a64(buf.data(), buf.size() - 8) != stored)
        fail(ErrorCode::corrupt, "checkpoint checksum mismatch (truncated or damaged file)");

    Reader r(buf.data() + sizeof kMagic + 4, buf.size() - sizeof kMagic - 4 - 8);
    const auto meta_len = r.pod<std::uint64_t>();
    if (meta_len > buf.size()) fail(ErrorCode::corrupt, "checkpoint metadata length is invalid");
    std::string meta_text(meta_len, '\0');
    r.bytes(meta_text.data(), meta_len);
    const nlohmann::json meta = parse_json(meta_text, "checkpoint metadata");

    ArchConfig arch;
    try {
        arch = meta.at("arch").get<ArchConfig>();
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::corrupt, std::string("checkpoint metadata: ") + e.what());
    }
    if (expected && !(arch == *expected))
        fail(ErrorCode::config, "checkpoint architecture " + meta.at("arch").dump() + " does not match the requested one");

    std::map<std::string, Parameter<float>> tensors;
    const auto count = r.pod<std::uint32_t>();
    for (std::uint32_t i = 0; i < count; ++i) {
        const auto len = r.pod<std::uint32_t>();
        std::string name(len, '\0');
        r.bytes(name.data(), len);
        if (r.pod<std::uint8_t>() != kDtypeF32) fail(ErrorCode::corrupt, "tensor " + name + " has an unknown dtype");
        const auto ndim = r.pod<std::uint32_t>();
        if (ndim > 8) fail(ErrorCode::corrupt, "tensor " + name + " has too many dimensions");
        std::vector<int> shape;
        std::uint64_t n = 1;
        for (std::uint32_t d = 0; d < ndim; ++d) {
            const auto dim = r.pod<std::uint64_t>();
            if (dim > (1u << 30)) fail(ErrorCode::corrupt, "tensor " + name + " has an invalid shape");
            shape.push_back(int(dim));
            n *= dim;
        }
        Parameter<float> p;
        p.shape = shape;
        p.value.resize(n);
        r.bytes(p.value.data(), n * sizeof(float));
        tensors.emplace(std::move(name), std::move(p));
    }
    if (!r.done()) fail(ErrorCode::corrupt, "trailing bytes after checkpoint tensors");

    Checkpoint ckpt{Dsrn<float>(arch)};
    std::size_t used = 0;
    ckpt.model.visit(ParamVisitor<float>([&](const std::string& name, Parameter<float>& p) {
        const auto it = tensors.find(name);
        if (it == tensors.end()) fail(ErrorCode::corrupt, "checkpoint lacks tensor " + name);
        if (it->second.shape != p.shape) fail(ErrorCode::corrupt, "tensor " + name + " has the wrong shape");
        p.value = it->second.value;
        ++used;
    }));
    if (used != tensors.size()) fail(ErrorCode::corrupt, "checkpoint holds tensors the architecture does not use");

    try {
        ckpt.config = meta.at("train").get<TrainConfig>();
        ckpt.stage = meta.at("stage").get<int>();
        ckpt.step = meta.at("step").get<int>();
        ckpt.best_val_psnr = meta.at("best_val_psnr").get<double>();
        if (meta.contains("task")) ckpt.task = meta.at("task").get<Task>();
        if (meta.contains("target")) ckpt.target = meta.at("target").get<IlluminationSetting>();
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::corrupt, std::string("checkpoint metadata: ") + e.what());
    }
    return ckpt;
}

}  // namespace

Checkpoint load_checkpoint(const std::filesystem::path& path) { return load_impl(path, nullptr); }

Checkpoint load_checkpoint(const std::filesystem::path& path, const ArchConfig& expected) {
    return load_impl(path, &expected);
}

}  // namespace dsrn
