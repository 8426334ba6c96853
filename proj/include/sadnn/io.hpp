#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "sadnn/models.hpp"
#include "sadnn/quant.hpp"

namespace sadnn {

// ---- tensor archive: a flat container of named, typed tensors ----
//
// Layout (little-endian):
//   magic "SADN" | u16 version | u32 record count
//   per record: u32 name length, name bytes, u8 elem kind, u8 flags
//               (bit 0: qparams present), u8 rank, u32 extents[rank],
//               [f64 scale, i32 zero_point], raw element data

namespace detail {

template <class T>
struct elem_kind_of;
template <>
struct elem_kind_of<float> {
    static constexpr std::uint8_t value = 0;
};
template <>
struct elem_kind_of<double> {
    static constexpr std::uint8_t value = 1;
};
template <>
struct elem_kind_of<std::int8_t> {
    static constexpr std::uint8_t value = 2;
};
template <>
struct elem_kind_of<std::int32_t> {
    static constexpr std::uint8_t value = 3;
};

inline std::size_t elem_kind_size(std::uint8_t kind) {
    switch (kind) {
        case 0: return 4;
        case 1: return 8;
        case 2: return 1;
        case 3: return 4;
    }
    throw IoError("archive: unknown element kind " + std::to_string(int(kind)));
}

}  // namespace detail

class TensorArchive {
public:
    static constexpr std::uint16_t kVersion = 1;

    struct Record {
        std::string name;
        std::uint8_t elem_kind = 0;
        std::vector<std::size_t> shape;
        std::vector<char> raw;
        bool has_qp = false;
        QuantParams qp;

        std::size_t numel() const {
            std::size_t n = 1;
            for (std::size_t e : shape) n *= e;
            return n;
        }
    };

    template <class T>
    void add(const std::string& name, const Tensor<T>& t) {
        Record r;
        r.name = name;
        r.elem_kind = detail::elem_kind_of<T>::value;
        r.shape = t.shape();
        r.raw.resize(t.numel() * sizeof(T));
        std::memcpy(r.raw.data(), t.data(), r.raw.size());
        put(std::move(r));
    }

    void add(const std::string& name, const QuantizedTensor& qt) {
        Record r;
        r.name = name;
        r.elem_kind = detail::elem_kind_of<std::int8_t>::value;
        r.shape = qt.data.shape();
        r.raw.resize(qt.data.numel());
        std::memcpy(r.raw.data(), qt.data.data(), r.raw.size());
        r.has_qp = true;
        r.qp = qt.qp;
        put(std::move(r));
    }

    bool has(const std::string& name) const { return index_.count(name) != 0; }

    const Record& record(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) throw IoError("archive: no record named '" + name + "'");
        return records_[it->second];
    }

    template <class T>
    Tensor<T> get(const std::string& name) const {
        const Record& r = record(name);
        if (r.elem_kind != detail::elem_kind_of<T>::value)
            throw IoError("archive: record '" + name + "' has a different element type");
        Tensor<T> t(r.shape);
        std::memcpy(t.data(), r.raw.data(), r.raw.size());
        return t;
    }

    QuantizedTensor get_quantized(const std::string& name) const {
        const Record& r = record(name);
        if (!r.has_qp)
            throw IoError("archive: record '" + name + "' carries no quantization params");
        return QuantizedTensor{get<std::int8_t>(name), r.qp};
    }

    const std::vector<Record>& records() const { return records_; }

    void save(const std::string& path) const {
        std::ofstream os(path, std::ios::binary);
        if (!os) throw IoError("cannot open '" + path + "' for writing");
        save(os, path);
    }

    void save(std::ostream& os, const std::string& path = "<stream>") const {
        os.write("SADN", 4);
        write_pod(os, kVersion);
        write_pod(os, std::uint32_t(records_.size()));
        for (const Record& r : records_) {
            write_pod(os, std::uint32_t(r.name.size()));
            os.write(r.name.data(), std::streamsize(r.name.size()));
            write_pod(os, r.elem_kind);
            write_pod(os, std::uint8_t(r.has_qp ? 1 : 0));
            write_pod(os, std::uint8_t(r.shape.size()));
            for (std::size_t e : r.shape) write_pod(os, std::uint32_t(e));
            if (r.has_qp) {
                write_pod(os, r.qp.scale);
                write_pod(os, std::int32_t(r.qp.zero_point));
            }
            os.write(r.raw.data(), std::streamsize(r.raw.size()));
        }
        if (!os) throw IoError("short write to '" + path + "'");
    }

    static TensorArchive load(const std::string& path) {
        std::ifstream is(path, std::ios::binary);
        if (!is) throw IoError("cannot open '" + path + "' for reading");
        return load(is, path);
    }

    static TensorArchive load(std::istream& is, const std::string& path = "<stream>") {
        char magic[4];
        if (!is.read(magic, 4) || std::memcmp(magic, "SADN", 4) != 0)
            throw IoError("'" + path + "': not a tensor archive (bad magic)");
        const auto version = read_pod<std::uint16_t>(is, path);
        if (version != kVersion)
            throw IoError("'" + path + "': unsupported archive version " +
                          std::to_string(version));
        const auto count = read_pod<std::uint32_t>(is, path);
        TensorArchive a;
        for (std::uint32_t i = 0; i < count; ++i) {
            Record r;
            const auto nlen = read_pod<std::uint32_t>(is, path);
            r.name.resize(nlen);
            if (!is.read(r.name.data(), nlen))
                throw IoError("'" + path + "': truncated archive");
            r.elem_kind = read_pod<std::uint8_t>(is, path);
            const auto flags = read_pod<std::uint8_t>(is, path);
            r.has_qp = (flags & 1) != 0;
            const auto rank = read_pod<std::uint8_t>(is, path);
            for (std::uint8_t d = 0; d < rank; ++d)
                r.shape.push_back(read_pod<std::uint32_t>(is, path));
            if (r.has_qp) {
                r.qp.scale = read_pod<double>(is, path);
                r.qp.zero_point = read_pod<std::int32_t>(is, path);
            }
            r.raw.resize(r.numel() * detail::elem_kind_size(r.elem_kind));
            if (!is.read(r.raw.data(), std::streamsize(r.raw.size())))
                throw IoError("'" + path + "': truncated archive");
            a.put(std::move(r));
        }
        return a;
    }

private:
    void put(Record r) {
        auto it = index_.find(r.name);
        if (it != index_.end()) {
            records_[it->second] = std::move(r);
            return;
        }
        index_[r.name] = records_.size();
        records_.push_back(std::move(r));
    }

    template <class T>
    static void write_pod(std::ostream& os, T v) {
        os.write(reinterpret_cast<const char*>(&v), sizeof(T));
    }
    template <class T>
    static T read_pod(std::istream& is, const std::string& path) {
        T v;
        if (!is.read(reinterpret_cast<char*>(&v), sizeof(T)))
            throw IoError("'" + path + "': truncated archive");
        return v;
    }

    std::vector<Record> records_;
    std::map<std::string, std::size_t> index_;
};

// ---- checkpoints ----

inline void save_checkpoint(const std::string& path, const NetworkGraph& g) {
    TensorArchive a;
    a.add("__meta__", encode_config(g.cfg));
    for (const auto& [name, t] : g.params) a.add(name, t);
    a.save(path);
}

inline NetworkGraph load_checkpoint(const std::string& path) {
    TensorArchive a = TensorArchive::load(path);
    if (a.has("__input_qp__"))
        throw IoError("'" + path + "': quantized checkpoint; expected a float one");
    const ModelConfig cfg = decode_config(a.get<std::int32_t>("__meta__"));
    NetworkGraph g = build_model(cfg);
    for (auto& [name, t] : g.params) {
        Tensor<float> loaded = a.get<float>(name);
        if (loaded.shape() != t.shape())
            throw IoError("'" + path + "': parameter '" + name + "' has the wrong shape");
        t = std::move(loaded);
    }
    return g;
}

inline void save_quantized(const std::string& path, const QuantizedNetwork& q) {
    TensorArchive a;
    a.add("__meta__", encode_config(q.cfg));
    auto qp_record = [&](const std::string& name, const QuantParams& qp) {
        a.add(name, Tensor<double>({2}, {qp.scale, double(qp.zero_point)}));
    };
    qp_record("__input_qp__", q.input_qp);
    for (const auto& [name, w] : q.weights) a.add(name, w);
    for (const auto& [name, b] : q.biases) a.add(name, b);
    for (const auto& [name, qp] : q.sites) qp_record("site:" + name, qp);
    a.save(path);
}

inline QuantizedNetwork load_quantized(const std::string& path) {
    TensorArchive a = TensorArchive::load(path);
    if (!a.has("__input_qp__"))
        throw IoError("'" + path + "': float checkpoint; expected a quantized one");
    const ModelConfig cfg = decode_config(a.get<std::int32_t>("__meta__"));
    // rebuild the topology; parameter values are replaced below
    NetworkGraph g = build_model(cfg);

    QuantizedNetwork q;
    q.cfg = cfg;
    q.nodes = g.nodes;
    q.output = g.output;
    auto read_qp = [&](const std::string& name) {
        Tensor<double> t = a.get<double>(name);
        if (t.numel() != 2) throw IoError("'" + path + "': malformed qparams record");
        return QuantParams{t[0], int(t[1])};
    };
    q.input_qp = read_qp("__input_qp__");
    for (const auto& r : a.records()) {
        if (r.name.rfind("site:", 0) == 0)
            q.sites[r.name.substr(5)] = read_qp(r.name);
        else if (r.has_qp)
            q.weights[r.name] = a.get_quantized(r.name);
        else if (r.elem_kind == detail::elem_kind_of<std::int32_t>::value &&
                 r.name != "__meta__")
            q.biases[r.name] = a.get<std::int32_t>(r.name);
    }
    // every float parameter must have an int8 counterpart
    for (const auto& [name, t] : g.params)
        if (q.weights.count(name) == 0 && q.biases.count(name) == 0)
            throw IoError("'" + path + "': missing quantized parameter '" + name + "'");
    return q;
}

// ---- PGM images (binary P5, maxval <= 65535, scaled to [0,1]) ----

inline Tensor<float> import_pgm(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open '" + path + "' for reading");
    auto next_token = [&]() -> std::string {
        std::string tok;
        // skip whitespace and '#' comment lines
        for (;;) {
            const int c = is.peek();
            if (c == '#') {
                std::string junk;
                std::getline(is, junk);
            } else if (std::isspace(c)) {
                is.get();
            } else {
                break;
            }
        }
        if (!(is >> tok)) throw IoError("'" + path + "': truncated PGM header");
        return tok;
    };
    if (next_token() != "P5") throw IoError("'" + path + "': not a binary PGM (P5)");
    std::size_t w, h;
    long maxval;
    try {
        w = std::stoul(next_token());
        h = std::stoul(next_token());
        maxval = std::stol(next_token());
    } catch (const std::exception&) {
        throw IoError("'" + path + "': malformed PGM header");
    }
    if (w == 0 || h == 0 || maxval <= 0 || maxval > 65535)
        throw IoError("'" + path + "': unsupported PGM geometry or maxval");
    is.get();  // single whitespace after maxval

    Tensor<float> img({1, h, w});
    const std::size_t bpp = maxval > 255 ? 2 : 1;
    std::vector<unsigned char> raw(w * h * bpp);
    if (!is.read(reinterpret_cast<char*>(raw.data()), std::streamsize(raw.size())))
        throw IoError("'" + path + "': truncated PGM pixel data");
    for (std::size_t i = 0; i < w * h; ++i) {
        const unsigned v = bpp == 1 ? raw[i]
                                    : unsigned(raw[2 * i]) << 8 | raw[2 * i + 1];
        img[i] = float(v) / float(maxval);
    }
    return img;
}

inline void export_pgm(const std::string& path, const Tensor<float>& img) {
    std::size_t h, w;
    if (img.rank() == 2) {
        h = img.extent(0);
        w = img.extent(1);
    } else if (img.rank() == 3 && img.extent(0) == 1) {
        h = img.extent(1);
        w = img.extent(2);
    } else {
        throw ShapeError("export_pgm: expected an HxW or 1xHxW image");
    }
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open '" + path + "' for writing");
    os << "P5\n" << w << " " << h << "\n255\n";
    for (std::size_t i = 0; i < h * w; ++i) {
        const float v = std::min(1.0f, std::max(0.0f, img[i]));
        os.put(char(int(std::lround(v * 255.0f))));
    }
    if (!os) throw IoError("short write to '" + path + "'");
}

}  // namespace sadnn
