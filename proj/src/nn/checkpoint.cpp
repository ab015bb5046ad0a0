#include "lpreform/nn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "lpreform/errors.hpp"

namespace lpreform::nn {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'L', 'P', 'R', 'F', 'C', 'K', 'P', 'T'};

class Writer {
public:
    explicit Writer(std::ostream& os) : os_(os) {}
    template <class T>
    void pod(T v) {
        os_.write(reinterpret_cast<const char*>(&v), sizeof v);
    }
    void str(const std::string& s) {
        pod(static_cast<std::uint32_t>(s.size()));
        os_.write(s.data(), static_cast<std::streamsize>(s.size()));
    }
    void matrix(const Matrix& m) {
        pod(static_cast<std::uint64_t>(m.rows()));
        pod(static_cast<std::uint64_t>(m.cols()));
        os_.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
    }

private:
    std::ostream& os_;
};

class Reader {
public:
    explicit Reader(std::istream& is) : is_(is) {}
    template <class T>
    T pod() {
        T v{};
        is_.read(reinterpret_cast<char*>(&v), sizeof v);
        check();
        return v;
    }
    std::string str() {
        auto n = pod<std::uint32_t>();
        if (n > (1u << 30)) throw CheckpointError("implausible string length");
        std::string s(n, '\0');
        is_.read(s.data(), n);
        check();
        return s;
    }
    Matrix matrix() {
        auto r = pod<std::uint64_t>();
        auto c = pod<std::uint64_t>();
        if (r > (1u << 24) || c > (1u << 24)) throw CheckpointError("implausible tensor shape");
        Matrix m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
        is_.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
        check();
        return m;
    }

private:
    void check() {
        if (!is_) throw CheckpointError("truncated checkpoint");
    }
    std::istream& is_;
};

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
    // Write to a sibling file and rename, so a crash never leaves a torn checkpoint.
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw IoError("cannot write checkpoint " + tmp.string());
        Writer w(os);
        os.write(kMagic, sizeof kMagic);
        w.pod(Checkpoint::kVersion);
        w.pod(ckpt.step);
        w.str(ckpt.meta);
        w.str(ckpt.rng_state);
        const auto& names = ckpt.params.names();
        w.pod(static_cast<std::uint32_t>(names.size()));
        for (const auto& n : names) {
            w.str(n);
            w.matrix(ckpt.params.get(n).value());
        }
        const auto& bufs = ckpt.params.buffer_names();
        w.pod(static_cast<std::uint32_t>(bufs.size()));
        for (const auto& n : bufs) {
            w.str(n);
            w.matrix(*ckpt.params.buffer(n));
        }
        w.pod(static_cast<std::uint32_t>(ckpt.optimizers.size()));
        for (const auto& [group, st] : ckpt.optimizers) {
            w.str(group);
            w.pod(st.step);
            w.pod(static_cast<std::uint32_t>(st.m.size()));
            for (const auto& [n, m] : st.m) {
                w.str(n);
                w.matrix(m);
                w.matrix(st.v.at(n));
            }
        }
        if (!os) throw IoError("failed writing checkpoint " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot move checkpoint into place: " + ec.message());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open checkpoint " + path.string());
    char magic[8];
    is.read(magic, sizeof magic);
    if (!is || std::memcmp(magic, kMagic, sizeof magic) != 0) throw CheckpointError("bad magic in " + path.string());
    Reader r(is);
    auto version = r.pod<std::uint32_t>();
    if (version != Checkpoint::kVersion) {
        throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
    }
    Checkpoint ck;
    ck.step = r.pod<std::uint64_t>();
    ck.meta = r.str();
    ck.rng_state = r.str();
    auto np = r.pod<std::uint32_t>();
    for (std::uint32_t i = 0; i < np; ++i) {
        auto name = r.str();
        ck.params.add(name, r.matrix());
    }
    auto nb = r.pod<std::uint32_t>();
    for (std::uint32_t i = 0; i < nb; ++i) {
        auto name = r.str();
        ck.params.set_buffer(name, r.matrix());
    }
    auto no = r.pod<std::uint32_t>();
    for (std::uint32_t i = 0; i < no; ++i) {
        auto group = r.str();
        AdamState st;
        st.step = r.pod<std::uint64_t>();
        auto nm = r.pod<std::uint32_t>();
        for (std::uint32_t j = 0; j < nm; ++j) {
            auto name = r.str();
            st.m[name] = r.matrix();
            st.v[name] = r.matrix();
        }
        ck.optimizers[group] = std::move(st);
    }
    if (is.peek() != std::char_traits<char>::eof()) throw CheckpointError("trailing bytes in checkpoint");
    return ck;
}

}  // namespace lpreform::nn
