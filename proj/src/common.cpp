#include "stst/common.hpp"

#include <cctype>

namespace stst {

Date Date::parse(std::string_view text) {
    auto bad = [&] { throw ValueError("invalid date '" + std::string(text) + "', expected YYYY-MM-DD"); };
    if (text.size() != 10 || text[4] != '-' || text[7] != '-') bad();
    for (size_t i : {0u, 1u, 2u, 3u, 5u, 6u, 8u, 9u})
        if (!std::isdigit(static_cast<unsigned char>(text[i]))) bad();
    Date d;
    d.year = (text[0] - '0') * 1000 + (text[1] - '0') * 100 + (text[2] - '0') * 10 + (text[3] - '0');
    d.month = (text[5] - '0') * 10 + (text[6] - '0');
    d.day = (text[8] - '0') * 10 + (text[9] - '0');
    if (!d.ok()) bad();
    return d;
}

std::string fnum(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace stst
