#include "moodpipe/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace moodpipe {

namespace {

constexpr char kMagic[] = "MOODPIPE1";
constexpr std::size_t kMagicLen = 9;

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

void write_u64(std::ostream& os, std::uint64_t v) {
    os.write(reinterpret_cast<const char*>(&v), 8);
}

std::uint64_t read_u64(std::istream& is) {
    std::uint64_t v = 0;
    is.read(reinterpret_cast<char*>(&v), 8);
    if (!is) throw std::runtime_error("checkpoint: truncated file");
    return v;
}

}  // namespace

void write_params(std::ostream& os, const ParamMap& params) {
    os.write(kMagic, kMagicLen);
    for (const auto& [name, t] : params) {
        write_u64(os, name.size());
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_u64(os, t.rank());
        for (auto d : t.shape) write_u64(os, d);
        os.write(reinterpret_cast<const char*>(t.data.data()),
                 static_cast<std::streamsize>(t.data.size() * sizeof(double)));
    }
}

ParamMap read_params(std::istream& is) {
    char magic[kMagicLen];
    is.read(magic, kMagicLen);
    if (!is || std::memcmp(magic, kMagic, kMagicLen) != 0)
        throw std::runtime_error("checkpoint: unknown magic");
    ParamMap out;
    while (true) {
        std::uint64_t name_len = 0;
        is.read(reinterpret_cast<char*>(&name_len), 8);
        if (is.eof()) break;
        if (!is) throw std::runtime_error("checkpoint: truncated file");
        std::string name(name_len, '\0');
        is.read(name.data(), static_cast<std::streamsize>(name_len));
        const std::uint64_t rank = read_u64(is);
        std::vector<std::size_t> shape(rank);
        std::size_t n = 1;
        for (auto& d : shape) {
            d = read_u64(is);
            n *= d;
        }
        std::vector<double> data(n);
        is.read(reinterpret_cast<char*>(data.data()),
                static_cast<std::streamsize>(n * sizeof(double)));
        if (!is) throw std::runtime_error("checkpoint: truncated file");
        out.emplace(std::move(name), Tensor(std::move(shape), std::move(data)));
    }
    return out;
}

void save_checkpoint(const std::string& path, const ParamMap& params) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("checkpoint: cannot open " + path + " for writing");
    write_params(os, params);
}

ParamMap load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("checkpoint: cannot open " + path);
    return read_params(is);
}

}  // namespace moodpipe
