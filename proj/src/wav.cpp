#include "moodpipe/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace moodpipe {

namespace {

template <typename T>
void write_le(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_le(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw std::runtime_error("wav: truncated file");
    return v;
}

}  // namespace

PcmSignal read_wav(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("wav: cannot open " + path);
    char tag[4];
    is.read(tag, 4);
    if (!is || std::memcmp(tag, "RIFF", 4) != 0)
        throw std::runtime_error("wav: " + path + " is not a RIFF file");
    read_le<std::uint32_t>(is);  // riff size
    is.read(tag, 4);
    if (!is || std::memcmp(tag, "WAVE", 4) != 0)
        throw std::runtime_error("wav: " + path + " is not a WAVE file");

    PcmSignal out;
    bool have_fmt = false;
    while (is.read(tag, 4)) {
        const auto chunk_size = read_le<std::uint32_t>(is);
        if (std::memcmp(tag, "fmt ", 4) == 0) {
            const auto format = read_le<std::uint16_t>(is);
            const auto channels = read_le<std::uint16_t>(is);
            const auto rate = read_le<std::uint32_t>(is);
            read_le<std::uint32_t>(is);  // byte rate
            read_le<std::uint16_t>(is);  // block align
            const auto bits = read_le<std::uint16_t>(is);
            if (format != 1 || bits != 16)
                throw std::runtime_error("wav: " + path + ": only PCM 16-bit supported");
            if (channels != 1)
                throw std::runtime_error("wav: " + path + ": only mono supported");
            out.sample_rate = static_cast<int>(rate);
            if (chunk_size > 16) is.seekg(chunk_size - 16, std::ios::cur);
            have_fmt = true;
        } else if (std::memcmp(tag, "data", 4) == 0) {
            if (!have_fmt) throw std::runtime_error("wav: data chunk before fmt");
            const std::size_t n = chunk_size / 2;
            out.samples.resize(n);
            for (std::size_t i = 0; i < n; ++i)
                out.samples[i] = read_le<std::int16_t>(is) / 32767.0;
            return out;
        } else {
            is.seekg(chunk_size + (chunk_size & 1), std::ios::cur);
        }
    }
    throw std::runtime_error("wav: " + path + ": no data chunk");
}

void write_wav(const std::string& path, const PcmSignal& signal) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("wav: cannot open " + path + " for writing");
    const std::uint32_t data_bytes = static_cast<std::uint32_t>(signal.samples.size() * 2);
    os.write("RIFF", 4);
    write_le<std::uint32_t>(os, 36 + data_bytes);
    os.write("WAVE", 4);
    os.write("fmt ", 4);
    write_le<std::uint32_t>(os, 16);
    write_le<std::uint16_t>(os, 1);  // PCM
    write_le<std::uint16_t>(os, 1);  // mono
    write_le<std::uint32_t>(os, static_cast<std::uint32_t>(signal.sample_rate));
    write_le<std::uint32_t>(os, static_cast<std::uint32_t>(signal.sample_rate * 2));
    write_le<std::uint16_t>(os, 2);
    write_le<std::uint16_t>(os, 16);
    os.write("data", 4);
    write_le<std::uint32_t>(os, data_bytes);
    for (double s : signal.samples) {
        const double clamped = std::clamp(s, -1.0, 1.0);
        write_le<std::int16_t>(os, static_cast<std::int16_t>(std::lrint(clamped * 32767.0)));
    }
}

}  // namespace moodpipe
