#include "causal_gate/types.hpp"

#include <algorithm>
#include <cctype>

namespace causal_gate {

namespace {

bool is_unsigned_integer(const std::string& s) {
    return !s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); });
}

std::string strip_leading_zeros(const std::string& s) {
    const auto pos = s.find_first_not_of('0');
    return pos == std::string::npos ? std::string("0") : s.substr(pos);
}

}  // namespace

bool model_id_less(const std::string& a, const std::string& b) {
    if (is_unsigned_integer(a) && is_unsigned_integer(b)) {
        const std::string sa = strip_leading_zeros(a);
        const std::string sb = strip_leading_zeros(b);
        if (sa.size() != sb.size()) return sa.size() < sb.size();
        if (sa != sb) return sa < sb;
        return a < b;
    }
    return a < b;
}

}  // namespace causal_gate
