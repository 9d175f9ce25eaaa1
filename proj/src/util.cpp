#include "t2s/util.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "t2s/error.hpp"

namespace t2s {

const char* errc_name(Errc code) {
    switch (code) {
        case Errc::MalformedSchema: return "MalformedSchema";
        case Errc::MissingDatabaseFile: return "MissingDatabaseFile";
        case Errc::DuplicateDbId: return "DuplicateDbId";
        case Errc::UnknownDbId: return "UnknownDbId";
        case Errc::MalformedExample: return "MalformedExample";
        case Errc::EmptyGeneration: return "EmptyGeneration";
        case Errc::ProviderUnavailable: return "ProviderUnavailable";
        case Errc::DimensionMismatch: return "DimensionMismatch";
        case Errc::ZeroVector: return "ZeroVector";
        case Errc::UnscoredAugmentation: return "UnscoredAugmentation";
        case Errc::EmptySet: return "EmptySet";
        case Errc::LengthMismatch: return "LengthMismatch";
        case Errc::SizeMismatch: return "SizeMismatch";
        case Errc::DbIdMismatch: return "DbIdMismatch";
        case Errc::EmptyInput: return "EmptyInput";
        case Errc::EmptyResponse: return "EmptyResponse";
        case Errc::Usage: return "Usage";
        case Errc::Io: return "Io";
    }
    return "UnknownError";
}

namespace util {

std::string lower_ascii(std::string_view s) {
    std::string out(s);
    for (char& c : out) {
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    }
    return out;
}

std::string collapse_whitespace(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    bool in_space = true; // swallow leading whitespace
    for (char c : s) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            if (!in_space) out.push_back(' ');
            in_space = true;
        } else {
            out.push_back(c);
            in_space = false;
        }
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    return out;
}

std::string single_line(std::string_view s) {
    return collapse_whitespace(s);
}

std::string trim(std::string_view s) {
    size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

std::string rtrim(std::string_view s) {
    size_t e = s.size();
    while (e > 0 && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(0, e));
}

bool starts_with_word_ci(std::string_view text, std::string_view word) {
    if (text.size() < word.size()) return false;
    for (size_t i = 0; i < word.size(); ++i) {
        char a = text[i], b = word[i];
        if (a >= 'A' && a <= 'Z') a = static_cast<char>(a - 'A' + 'a');
        if (b >= 'A' && b <= 'Z') b = static_cast<char>(b - 'A' + 'a');
        if (a != b) return false;
    }
    if (text.size() == word.size()) return true;
    char next = text[word.size()];
    return !(std::isalnum(static_cast<unsigned char>(next)) || next == '_');
}

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(Errc::Io, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) fail(Errc::Io, "cannot write " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) fail(Errc::Io, "short write to " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

double round1(double v) {
    return std::round(v * 10.0) / 10.0;
}

std::string format_pct1(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.1f", round1(v));
    // normalize "-0.0" to "0.0"
    if (std::string_view(buf) == "-0.0") return "0.0";
    return buf;
}

nlohmann::json artifact_meta(const std::string& config_hash, std::uint64_t rng_seed) {
    return nlohmann::json{
        {"tool_version", kToolVersion},
        {"config_hash", config_hash},
        {"rng_seed", rng_seed},
    };
}

} // namespace util
} // namespace t2s
