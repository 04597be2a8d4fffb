#pragma once

#include <cstddef>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>

namespace accsev::textio {

/// Shortest decimal text that reads back to the same double.
std::string format_double(double v);

/// Whitespace-token reader for the versioned model format. Every malformed
/// token raises accsev::Error naming what was expected.
class TokenReader {
public:
    explicit TokenReader(std::istream& in) : in_(in) {}

    std::string word();
    void expect(std::string_view keyword);
    double real();
    std::size_t count();
    long long integer();
    /// Rest of the current line with leading blanks removed.
    std::string line();

private:
    std::istream& in_;
};

}  // namespace accsev::textio
