#include "arbsr/scale.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>

namespace arbsr {

std::string ScalePair::str() const {
    char buf[64];
    if (symmetric()) {
        std::snprintf(buf, sizeof(buf), "%g", (double)r_h);
    } else {
        std::snprintf(buf, sizeof(buf), "%gx%g", (double)r_h, (double)r_v);
    }
    return buf;
}

namespace {

real parse_one(const std::string& part, const std::string& whole) {
    if (part.empty()) throw config_error("bad scale '" + whole + "'");
    char* end = nullptr;
    const double v = std::strtod(part.c_str(), &end);
    if (end != part.c_str() + part.size())
        throw config_error("bad scale '" + whole + "': cannot parse '" + part + "'");
    if (!std::isfinite(v) || v <= 0)
        throw config_error("bad scale '" + whole + "': factors must be positive and finite");
    return (real)v;
}

}  // namespace

ScalePair parse_scale(const std::string& text) {
    const auto sep = text.find('x');
    if (sep == std::string::npos) {
        const real r = parse_one(text, text);
        return ScalePair{r, r};
    }
    return ScalePair{parse_one(text.substr(0, sep), text),
                     parse_one(text.substr(sep + 1), text)};
}

const std::vector<real>& symmetric_scale_grid() {
    static const std::vector<real> grid = [] {
        std::vector<real> g;
        for (int i = 11; i <= 40; ++i) g.push_back(real(i) / real(10));
        return g;
    }();
    return grid;
}

const std::vector<ScalePair>& asymmetric_scale_grid() {
    static const std::vector<ScalePair> grid = [] {
        std::vector<ScalePair> g;
        for (int a = 3; a <= 8; ++a)
            for (int b = 3; b <= 8; ++b) {
                if (a == b) continue;
                g.push_back(ScalePair{real(a) / real(2), real(b) / real(2)});
            }
        return g;
    }();
    return grid;
}

}  // namespace arbsr
