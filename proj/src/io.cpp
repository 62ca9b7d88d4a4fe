#include "koopgrip/io.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "koopgrip/errors.hpp"

namespace koopgrip {

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

double parse_double(const std::string& text) {
    std::size_t b = text.find_first_not_of(" \t\r");
    std::size_t e = text.find_last_not_of(" \t\r");
    if (b == std::string::npos) throw InputError("empty numeric field");
    const char* first = text.data() + b;
    const char* last = text.data() + e + 1;
    if (*first == '+') ++first;
    double v = 0.0;
    const auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc() || res.ptr != last) throw InputError("not a number: '" + text + "'");
    return v;
}

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

void apply_meta(RecordingMeta& meta, const std::string& key, const std::string& value) {
    if (key == "subject") meta.subject = value;
    else if (key == "position") meta.position = value;
    else if (key == "replication") meta.replication = static_cast<int>(parse_double(value));
}

}  // namespace

void write_series(std::ostream& os, const TimestampedSeries& series, const RecordingMeta* meta) {
    if (meta) {
        os << "# subject=" << meta->subject << '\n';
        os << "# position=" << meta->position << '\n';
        os << "# replication=" << meta->replication << '\n';
    }
    os << "t_s,value\n";
    for (std::size_t i = 0; i < series.size(); ++i)
        os << format_double(series.times[i]) << ',' << format_double(series.values[i]) << '\n';
}

TimestampedSeries read_series(std::istream& is, RecordingMeta* meta) {
    TimestampedSeries out;
    std::string line;
    std::size_t lineNo = 0;
    bool header = false;
    while (std::getline(is, line)) {
        ++lineNo;
        line = trim(line);
        if (line.empty()) continue;
        if (line[0] == '#') {
            const auto eq = line.find('=');
            if (meta && eq != std::string::npos) apply_meta(*meta, trim(line.substr(1, eq - 1)), trim(line.substr(eq + 1)));
            continue;
        }
        const auto comma = line.find(',');
        if (comma == std::string::npos) throw InputError("line " + std::to_string(lineNo) + ": expected 't,value'");
        if (!header) {
            header = true;
            // a non-numeric first row is a header
            try {
                parse_double(line.substr(0, comma));
            } catch (const InputError&) {
                continue;
            }
        }
        try {
            out.times.push_back(parse_double(line.substr(0, comma)));
            out.values.push_back(parse_double(line.substr(comma + 1)));
        } catch (const InputError& e) {
            throw InputError("line " + std::to_string(lineNo) + ": " + e.what());
        }
    }
    out.validate();
    return out;
}

void write_series_file(const std::filesystem::path& path, const TimestampedSeries& series, const RecordingMeta* meta) {
    std::ofstream os(path);
    if (!os) throw InputError("cannot write " + path.string());
    write_series(os, series, meta);
}

TimestampedSeries read_series_file(const std::filesystem::path& path, RecordingMeta* meta) {
    std::ifstream is(path);
    if (!is) throw InputError("cannot open " + path.string());
    try {
        return read_series(is, meta);
    } catch (const InputError& e) {
        throw InputError(path.string() + ": " + e.what());
    }
}

namespace {
std::filesystem::path with_suffix(const std::filesystem::path& stem, const char* suffix) {
    return stem.parent_path() / (stem.filename().string() + suffix);
}
}  // namespace

void write_recording(const std::filesystem::path& stem, const Recording& rec) {
    if (stem.has_parent_path()) std::filesystem::create_directories(stem.parent_path());
    write_series_file(with_suffix(stem, "_emg.csv"), rec.emg, &rec.meta);
    write_series_file(with_suffix(stem, "_grip.csv"), rec.grip, &rec.meta);
}

Recording read_recording(const std::filesystem::path& stem) {
    Recording rec;
    rec.emg = read_series_file(with_suffix(stem, "_emg.csv"), &rec.meta);
    rec.grip = read_series_file(with_suffix(stem, "_grip.csv"), &rec.meta);
    return rec;
}

void write_mask(std::ostream& os, const SpectralMask& mask) {
    for (std::size_t k = 0; k < mask.size(); ++k)
        os << format_double(mask.frequency(k)) << '\t' << format_double(mask.gains[k]) << '\n';
}

SpectralMask read_mask(std::istream& is) {
    SpectralMask mask;
    std::vector<double> freqs;
    std::string line;
    while (std::getline(is, line)) {
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        std::string f, g;
        if (!(ss >> f >> g)) throw InputError("mask line needs 'frequency gain': " + line);
        freqs.push_back(parse_double(f));
        mask.gains.push_back(parse_double(g));
    }
    if (mask.gains.size() < 2) throw InputError("mask needs at least two bins");
    mask.binResolution = freqs[1] - freqs[0];
    if (!(mask.binResolution > 0.0)) throw InputError("mask frequencies must increase");
    for (double g : mask.gains)
        if (!(g >= 0.0)) throw InputError("mask gains must be non-negative");
    return mask;
}

Config Config::parse(std::istream& is) {
    Config cfg;
    std::string section, line;
    std::size_t lineNo = 0;
    while (std::getline(is, line)) {
        ++lineNo;
        const auto hash = line.find_first_of("#;");
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError("line " + std::to_string(lineNo) + ": unterminated section");
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineNo) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        cfg.values_[section.empty() ? key : section + "." + key] = trim(line.substr(eq + 1));
    }
    return cfg;
}

Config Config::load(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config " + path.string());
    return parse(is);
}

std::optional<std::string> Config::get(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    return it->second;
}

template <>
double Config::resolve<double>(const std::string& key, const std::optional<double>& flag, double fallback) const {
    if (flag) return *flag;
    if (const auto v = get(key)) {
        try {
            return parse_double(*v);
        } catch (const InputError&) {
            throw ConfigError("config key " + key + " is not a number: " + *v);
        }
    }
    return fallback;
}

template <>
int Config::resolve<int>(const std::string& key, const std::optional<int>& flag, int fallback) const {
    if (flag) return *flag;
    if (const auto v = get(key)) {
        int out = 0;
        const auto res = std::from_chars(v->data(), v->data() + v->size(), out);
        if (res.ec != std::errc() || res.ptr != v->data() + v->size())
            throw ConfigError("config key " + key + " is not an integer: " + *v);
        return out;
    }
    return fallback;
}

template <>
std::string Config::resolve<std::string>(const std::string& key, const std::optional<std::string>& flag,
                                         std::string fallback) const {
    if (flag) return *flag;
    if (const auto v = get(key)) return *v;
    return fallback;
}

}  // namespace koopgrip
