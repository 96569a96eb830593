#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>

#include "harmonic/errors.hpp"
#include "harmonic/experiments.hpp"

namespace harmonic {

namespace {

constexpr const char* kMagic = "HARMCKPT1";
constexpr const char* kArchEntry = "__arch__";

template <typename U>
void put_le(std::string& out, U bits) {
    for (std::size_t b = 0; b < sizeof(U); ++b) {
        out.push_back(static_cast<char>((bits >> (8 * b)) & 0xFF));
    }
}

template <typename U>
U get_le(const char* p) {
    U bits = 0;
    for (std::size_t b = 0; b < sizeof(U); ++b) {
        bits |= static_cast<U>(static_cast<unsigned char>(p[b])) << (8 * b);
    }
    return bits;
}

template <typename T>
void put_tensor(std::string& out, const std::string& name, const Tensor<T>& t) {
    out += name + "\n" + std::string(dtype_name(dtype_of<T>())) + " " + std::to_string(t.rank());
    for (std::size_t d : t.dims()) {
        out += " " + std::to_string(d);
    }
    out += "\n";
    for (std::size_t i = 0; i < t.size(); ++i) {
        if constexpr (std::is_same_v<T, float>) {
            put_le(out, std::bit_cast<std::uint32_t>(t[i]));
        } else {
            put_le(out, std::bit_cast<std::uint64_t>(t[i]));
        }
    }
}

struct Entry {
    std::string name;
    std::string dtype;
    Shape dims;
    std::string payload;
};

class Reader {
public:
    Reader(std::string bytes, std::string source) : bytes_(std::move(bytes)), source_(std::move(source)) {}

    bool done() const { return pos_ == bytes_.size(); }

    std::string line() {
        const auto nl = bytes_.find('\n', pos_);
        if (nl == std::string::npos) {
            fail("truncated header line");
        }
        std::string out = bytes_.substr(pos_, nl - pos_);
        pos_ = nl + 1;
        return out;
    }

    Entry entry() {
        Entry e;
        e.name = line();
        std::istringstream header(line());
        std::size_t rank = 0;
        if (!(header >> e.dtype >> rank) || rank > kMaxRank) {
            fail("bad tensor header for " + e.name);
        }
        for (std::size_t i = 0; i < rank; ++i) {
            std::size_t d = 0;
            if (!(header >> d)) {
                fail("bad dims for " + e.name);
            }
            e.dims.push_back(d);
        }
        std::size_t width = 0;
        if (e.dtype == "u8") {
            width = 1;
        } else if (e.dtype == "f32") {
            width = 4;
        } else if (e.dtype == "f64") {
            width = 8;
        } else {
            fail("unknown dtype '" + e.dtype + "' for " + e.name);
        }
        const std::size_t n = shape_size(e.dims) * width;
        if (bytes_.size() - pos_ < n) {
            fail("truncated payload for " + e.name);
        }
        e.payload = bytes_.substr(pos_, n);
        pos_ += n;
        return e;
    }

    [[noreturn]] void fail(const std::string& what) const {
        throw FormatError(source_ + ": " + what);
    }

private:
    std::string bytes_;
    std::string source_;
    std::size_t pos_ = 0;
};

Reader open_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open checkpoint " + path.string());
    }
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    Reader r(std::move(bytes), path.string());
    if (r.done() || r.line() != kMagic) {
        r.fail("not a checkpoint (magic mismatch)");
    }
    return r;
}

template <typename T>
Tensor<T> decode(const Entry& e) {
    Tensor<T> t(e.dims);
    const char* p = e.payload.data();
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (e.dtype == "f32") {
            t[i] = static_cast<T>(std::bit_cast<float>(get_le<std::uint32_t>(p + 4 * i)));
        } else {
            t[i] = static_cast<T>(std::bit_cast<double>(get_le<std::uint64_t>(p + 8 * i)));
        }
    }
    return t;
}

} // namespace

template <typename T>
void save_checkpoint(ModelGraph<T>& model, const std::filesystem::path& path) {
    if (model.arch().empty()) {
        throw ValueError("model has no architecture description; cannot checkpoint");
    }
    std::string out = std::string(kMagic) + "\n";
    out += std::string(kArchEntry) + "\nu8 1 " + std::to_string(model.arch().size()) + "\n" +
           model.arch();
    for (Parameter<T>* p : model.state()) {
        put_tensor(out, p->name, p->value);
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) {
        throw IoError("cannot create checkpoint " + path.string());
    }
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) {
        throw IoError("write failed: " + path.string());
    }
}

template <typename T>
ModelGraph<T> load_checkpoint(const std::filesystem::path& path) {
    Reader r = open_checkpoint(path);
    const Entry arch = r.entry();
    if (arch.name != kArchEntry || arch.dtype != "u8") {
        r.fail("first entry must be the architecture description");
    }
    std::map<std::string, Entry> entries;
    while (!r.done()) {
        Entry e = r.entry();
        if (e.dtype == "u8") {
            r.fail("unexpected u8 entry " + e.name);
        }
        const std::string name = e.name;
        if (!entries.emplace(name, std::move(e)).second) {
            r.fail("duplicate entry " + name);
        }
    }
    ModelGraph<T> model = build_from_arch<T>(arch.payload);
    const auto state = model.state();
    if (state.size() != entries.size()) {
        r.fail("checkpoint holds " + std::to_string(entries.size()) + " tensors, model expects " +
               std::to_string(state.size()));
    }
    for (Parameter<T>* p : state) {
        const auto it = entries.find(p->name);
        if (it == entries.end()) {
            r.fail("missing tensor " + p->name);
        }
        if (it->second.dims != p->value.dims()) {
            r.fail("shape mismatch for " + p->name + ": " + shape_str(it->second.dims) + " vs " +
                   shape_str(p->value.dims()));
        }
        p->value = decode<T>(it->second);
        p->apply_mask();
        p->touch();
    }
    return model;
}

DType checkpoint_dtype(const std::filesystem::path& path) {
    Reader r = open_checkpoint(path);
    r.entry();
    if (r.done()) {
        r.fail("no parameter tensors");
    }
    return parse_dtype(r.entry().dtype);
}

template void save_checkpoint<float>(ModelGraph<float>&, const std::filesystem::path&);
template void save_checkpoint<double>(ModelGraph<double>&, const std::filesystem::path&);
template ModelGraph<float> load_checkpoint<float>(const std::filesystem::path&);
template ModelGraph<double> load_checkpoint<double>(const std::filesystem::path&);

} // namespace harmonic
