#include "ldwr/descriptor_io.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <unordered_map>

namespace ldwr {

namespace {

class ByteWriter {
public:
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
    void raw(const void* data, std::size_t n) {
        const auto* p = static_cast<const std::uint8_t*>(data);
        bytes_.insert(bytes_.end(), p, p + n);
    }
    std::vector<std::uint8_t> take() { return std::move(bytes_); }

private:
    std::vector<std::uint8_t> bytes_;
};

class ByteReader {
public:
    explicit ByteReader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

    std::size_t offset() const { return pos_; }
    std::size_t remaining() const { return bytes_.size() - pos_; }

    void need(std::size_t n, const char* what) const {
        if (remaining() < n) {
            throw ParseError(std::string("truncated file while reading ") + what + ": need " +
                                 std::to_string(n) + " bytes, " + std::to_string(remaining()) +
                                 " left",
                             pos_);
        }
    }
    std::uint32_t u32(const char* what) {
        need(4, what);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
        pos_ += 4;
        return v;
    }
    std::uint64_t u64(const char* what) {
        need(8, what);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
        pos_ += 8;
        return v;
    }
    float f32(const char* what) { return std::bit_cast<float>(u32(what)); }
    std::string text(std::size_t n, const char* what) {
        need(n, what);
        std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
        pos_ += n;
        return s;
    }

private:
    const std::vector<std::uint8_t>& bytes_;
    std::size_t pos_ = 0;
};

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

std::string format_real(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string format_list(const std::vector<double>& values) {
    std::string out = "[";
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) out += ", ";
        out += format_real(values[i]);
    }
    return out + "]";
}

}  // namespace

std::vector<std::uint8_t> encode_dataset(const DescriptorDataset& ds) {
    ds.validate();
    std::unordered_map<std::string, std::uint32_t> index;
    for (std::size_t c = 0; c < ds.classes.size(); ++c) {
        index.emplace(ds.classes[c], static_cast<std::uint32_t>(c));
    }

    ByteWriter w;
    w.raw(kDescriptorMagic, 4);
    w.u32(kDescriptorFormatVersion);
    w.u32(static_cast<std::uint32_t>(ds.channels));
    w.u32(static_cast<std::uint32_t>(ds.height));
    w.u32(static_cast<std::uint32_t>(ds.width));
    w.u64(ds.samples.size());
    w.u32(static_cast<std::uint32_t>(ds.classes.size()));
    for (const auto& name : ds.classes) {
        w.u32(static_cast<std::uint32_t>(name.size()));
        w.raw(name.data(), name.size());
    }
    for (const auto& s : ds.samples) {
        w.u32(index.at(s.label));
        w.u64(s.sample_id);
        for (float v : s.descriptors.to_channel_major()) w.f32(v);
    }
    return w.take();
}

DescriptorDataset decode_dataset(const std::vector<std::uint8_t>& bytes, std::string source) {
    ByteReader r(bytes);
    if (r.text(4, "magic") != std::string(kDescriptorMagic, 4)) {
        throw ParseError("bad magic, expected \"LDWR\"", 0);
    }
    const std::uint32_t version = r.u32("version");
    if (version != kDescriptorFormatVersion) {
        throw ParseError("unsupported format version " + std::to_string(version), 4);
    }

    DescriptorDataset ds;
    ds.source = std::move(source);
    ds.channels = r.u32("channels");
    ds.height = r.u32("height");
    ds.width = r.u32("width");
    const std::uint64_t sample_count = r.u64("sample count");
    const std::uint32_t class_count = r.u32("class count");
    if (ds.channels == 0 || ds.height == 0 || ds.width == 0) {
        throw ParseError("descriptor dimensions must be positive", 8);
    }
    if (class_count == 0) throw ParseError("empty class table", 28);

    for (std::uint32_t c = 0; c < class_count; ++c) {
        const std::size_t at = r.offset();
        const std::uint32_t len = r.u32("class name length");
        ds.classes.push_back(r.text(len, "class name"));
        for (std::uint32_t j = 0; j < c; ++j) {
            if (ds.classes[j] == ds.classes[c]) throw ParseError("duplicate class name '" + ds.classes[c] + "'", at);
        }
    }

    std::uint64_t values = 0, record_bytes = 0, body = 0, expected = 0;
    const bool overflow =
        __builtin_mul_overflow(static_cast<std::uint64_t>(ds.channels), ds.height, &values) ||
        __builtin_mul_overflow(values, ds.width, &values) ||
        __builtin_mul_overflow(values, std::uint64_t{4}, &record_bytes) ||
        __builtin_add_overflow(record_bytes, kRecordHeaderBytes, &record_bytes) ||
        __builtin_mul_overflow(sample_count, record_bytes, &body) ||
        __builtin_add_overflow(body, r.offset(), &expected);
    if (overflow) {
        throw ParseError("file is " + std::to_string(bytes.size()) +
                             " bytes, header implies more than 2^64 bytes",
                         bytes.size());
    }
    if (bytes.size() != expected) {
        throw ParseError("file is " + std::to_string(bytes.size()) + " bytes, header implies " +
                             std::to_string(expected),
                         bytes.size() < expected ? bytes.size() : expected);
    }

    std::vector<float> chw(values);
    ds.samples.reserve(sample_count);
    for (std::uint64_t s = 0; s < sample_count; ++s) {
        const std::size_t at = r.offset();
        const std::uint32_t cls = r.u32("class index");
        if (cls >= class_count) {
            throw ParseError("sample " + std::to_string(s) + " has class index " +
                                 std::to_string(cls) + " outside the class table",
                             at);
        }
        const std::uint64_t id = r.u64("sample id");
        for (std::uint64_t v = 0; v < values; ++v) {
            const std::size_t value_at = r.offset();
            chw[v] = r.f32("descriptor value");
            if (!std::isfinite(chw[v])) {
                throw ParseError("non-finite value in sample " + std::to_string(s) + " at position " +
                                     std::to_string(v) + " (channel " +
                                     std::to_string(v / (ds.height * ds.width)) + ", spatial " +
                                     std::to_string(v % (ds.height * ds.width)) + ")",
                                 value_at);
            }
        }
        ds.samples.push_back({DescriptorSet::from_channel_major(ds.channels, ds.height, ds.width, chw),
                              ds.classes[cls], id});
    }
    return ds;
}

DescriptorDataset read_dataset(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open descriptor file " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    try {
        return decode_dataset(bytes, path.string());
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.detail(), e.offset());
    }
}

void write_dataset(const DescriptorDataset& ds, const std::filesystem::path& path) {
    const auto bytes = encode_dataset(ds);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw ConfigError("write failed for " + path.string());
}

KeyValues parse_key_values(const std::string& text) {
    KeyValues out;
    std::istringstream in(text);
    std::string line;
    std::size_t offset = 0;
    while (std::getline(in, line)) {
        const std::size_t line_start = offset;
        offset += line.size() + 1;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ParseError("expected 'key = value', got '" + line + "'", line_start);
        std::string key = trim(line.substr(0, eq));
        if (key.empty()) throw ParseError("empty key", line_start);
        if (out.contains(key)) throw ParseError("duplicate key '" + key + "'", line_start);
        out.emplace(std::move(key), trim(line.substr(eq + 1)));
    }
    return out;
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

double parse_real(const std::string& text, const std::string& key) {
    double v = 0.0;
    const char* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc{} || ptr != end || !std::isfinite(v)) {
        throw ConfigError("key '" + key + "': '" + text + "' is not a finite real number");
    }
    return v;
}

std::uint64_t parse_unsigned(const std::string& text, const std::string& key) {
    std::uint64_t v = 0;
    const char* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc{} || ptr != end) {
        throw ConfigError("key '" + key + "': '" + text + "' is not a nonnegative integer");
    }
    return v;
}

std::vector<double> parse_real_list(const std::string& text, const std::string& key) {
    std::string body = trim(text);
    if (!body.empty() && body.front() == '[') {
        if (body.back() != ']') throw ConfigError("key '" + key + "': unterminated list");
        body = body.substr(1, body.size() - 2);
    }
    for (char& ch : body) {
        if (ch == ',') ch = ' ';
    }
    std::vector<double> out;
    std::istringstream in(body);
    std::string token;
    while (in >> token) out.push_back(parse_real(token, key));
    return out;
}

CrossNormParams parse_cn_params(const std::string& text) {
    CrossNormParams p;
    for (const auto& [key, value] : parse_key_values(text)) {
        if (key == "a1") p.a1 = parse_real(value, key);
        else if (key == "b1") p.b1 = parse_real(value, key);
        else if (key == "a2") p.a2 = parse_real(value, key);
        else if (key == "b2") p.b2 = parse_real(value, key);
        else if (key == "gamma") p.gamma = parse_real_list(value, key);
        else if (key == "beta") p.beta = parse_real_list(value, key);
        else if (key == "omega1") p.omega1 = parse_real(value, key);
        else if (key == "omega2") p.omega2 = parse_real(value, key);
        else if (key == "epsilon") p.epsilon = parse_real(value, key);
        else throw ConfigError("unknown cross-norm parameter '" + key + "'");
    }
    if (!(p.omega1 > 0.0) || !(p.omega2 > 0.0) || !(p.epsilon > 0.0)) {
        throw ConfigError("cross-norm omega1, omega2 and epsilon must be positive");
    }
    return p;
}

CrossNormParams load_cn_params(const std::filesystem::path& path) {
    return parse_cn_params(read_text_file(path));
}

std::string format_cn_params(const CrossNormParams& p) {
    std::string out;
    out += "a1 = " + format_real(p.a1) + "\n";
    out += "b1 = " + format_real(p.b1) + "\n";
    out += "a2 = " + format_real(p.a2) + "\n";
    out += "b2 = " + format_real(p.b2) + "\n";
    out += "gamma = " + format_list(p.gamma) + "\n";
    out += "beta = " + format_list(p.beta) + "\n";
    out += "omega1 = " + format_real(p.omega1) + "\n";
    out += "omega2 = " + format_real(p.omega2) + "\n";
    out += "epsilon = " + format_real(p.epsilon) + "\n";
    return out;
}

SyntheticSpec parse_synthetic_spec(const std::string& text) {
    SyntheticSpec s;
    for (const auto& [key, value] : parse_key_values(text)) {
        if (key == "n_classes") s.n_classes = parse_unsigned(value, key);
        else if (key == "samples_per_class") s.samples_per_class = parse_unsigned(value, key);
        else if (key == "channels") s.channels = parse_unsigned(value, key);
        else if (key == "height") s.height = parse_unsigned(value, key);
        else if (key == "width") s.width = parse_unsigned(value, key);
        else if (key == "foreground_fraction") s.foreground_fraction = parse_real(value, key);
        else if (key == "signal_to_noise") s.signal_to_noise = parse_real(value, key);
        else if (key == "class_overlap") s.class_overlap = parse_real(value, key);
        else if (key == "background_modes") s.background_modes = parse_unsigned(value, key);
        else if (key == "background_strength") s.background_strength = parse_real(value, key);
        else if (key == "seed") s.seed = parse_unsigned(value, key);
        else throw ConfigError("unknown synthetic spec key '" + key + "'");
    }
    s.validate();
    return s;
}

SyntheticSpec load_synthetic_spec(const std::filesystem::path& path) {
    return parse_synthetic_spec(read_text_file(path));
}

std::string format_synthetic_spec(const SyntheticSpec& s) {
    std::string out;
    out += "n_classes = " + std::to_string(s.n_classes) + "\n";
    out += "samples_per_class = " + std::to_string(s.samples_per_class) + "\n";
    out += "channels = " + std::to_string(s.channels) + "\n";
    out += "height = " + std::to_string(s.height) + "\n";
    out += "width = " + std::to_string(s.width) + "\n";
    out += "foreground_fraction = " + format_real(s.foreground_fraction) + "\n";
    out += "signal_to_noise = " + format_real(s.signal_to_noise) + "\n";
    out += "class_overlap = " + format_real(s.class_overlap) + "\n";
    out += "background_modes = " + std::to_string(s.background_modes) + "\n";
    out += "background_strength = " + format_real(s.background_strength) + "\n";
    out += "seed = " + std::to_string(s.seed) + "\n";
    return out;
}

}  // namespace ldwr
