#include "accsev/textio.hpp"

#include <charconv>
#include <cmath>

#include "accsev/common.hpp"

namespace accsev::textio {

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

std::string TokenReader::word() {
    std::string w;
    if (!(in_ >> w)) throw Error("model file: unexpected end of input");
    return w;
}

void TokenReader::expect(std::string_view keyword) {
    const std::string w = word();
    if (w != keyword) throw Error("model file: expected '" + std::string(keyword) + "', found '" + w + "'");
}

double TokenReader::real() {
    const std::string w = word();
    if (w == "nan") return std::nan("");
    if (w == "inf") return HUGE_VAL;
    if (w == "-inf") return -HUGE_VAL;
    double v = 0;
    auto [ptr, ec] = std::from_chars(w.data(), w.data() + w.size(), v);
    if (ec != std::errc{} || ptr != w.data() + w.size()) throw Error("model file: expected a number, found '" + w + "'");
    return v;
}

std::size_t TokenReader::count() {
    const long long v = integer();
    if (v < 0) throw Error("model file: expected a non-negative count");
    return static_cast<std::size_t>(v);
}

long long TokenReader::integer() {
    const std::string w = word();
    long long v = 0;
    auto [ptr, ec] = std::from_chars(w.data(), w.data() + w.size(), v);
    if (ec != std::errc{} || ptr != w.data() + w.size()) throw Error("model file: expected an integer, found '" + w + "'");
    return v;
}

std::string TokenReader::line() {
    std::string rest;
    std::getline(in_, rest);
    const auto start = rest.find_first_not_of(" \t");
    return start == std::string::npos ? std::string{} : rest.substr(start);
}

}  // namespace accsev::textio
