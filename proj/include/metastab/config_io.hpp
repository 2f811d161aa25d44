#pragma once

#include <cstdio>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "metastab/lattice.hpp"

namespace metastab {

/// '+'/'-' grid: last axis along a row, second-to-last axis down the rows,
/// higher axes as blank-line separated blocks.
inline std::string to_text_grid(const Configuration& c) {
    const BoxGeometry g(c.dims());
    const std::size_t row = static_cast<std::size_t>(g.side(g.d() - 1));
    const std::size_t block = g.d() >= 2 ? row * static_cast<std::size_t>(g.side(g.d() - 2)) : row;
    std::string out;
    for (Site x = 0; x < g.sites(); ++x) {
        if (x > 0 && x % row == 0) out += '\n';
        if (x > 0 && x % block == 0) out += '\n';
        out += c.plus(x) ? '+' : '-';
    }
    out += '\n';
    return out;
}

inline Configuration from_text_grid(const BoxGeometry& g, const std::string& text) {
    Configuration c(g);
    Site x = 0;
    for (char ch : text) {
        if (ch == '+' || ch == '-') {
            if (x >= g.sites()) throw std::invalid_argument("text grid has too many cells");
            c.set(x++, ch == '+');
        } else if (ch != '\n' && ch != ' ' && ch != '\r' && ch != '\t') {
            throw std::invalid_argument(std::string("unexpected character in text grid: ") + ch);
        }
    }
    if (x != g.sites()) throw std::invalid_argument("text grid has too few cells");
    return c;
}

/// "dims=a,b,...;bc=<kind>\n" followed by the bit words as 16-digit hex, least significant word first.
inline std::string to_hex_dump(const Configuration& c, const BoundaryCondition& bc) {
    std::string out = "dims=" + BoxGeometry(c.dims()).str() + ";bc=" + bc.str() + "\n";
    char buf[17];
    for (auto w : c.words()) {
        std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(w));
        out += buf;
    }
    out += '\n';
    return out;
}

struct HexDump {
    BoxGeometry geometry;
    std::string bc;
    Configuration config;
};

inline HexDump from_hex_dump(const std::string& text) {
    std::istringstream in(text);
    std::string header, body;
    std::getline(in, header);
    std::getline(in, body);
    auto semi = header.find(";bc=");
    if (header.rfind("dims=", 0) != 0 || semi == std::string::npos)
        throw std::invalid_argument("hex dump header must look like dims=a,b;bc=<kind>");
    std::vector<int> dims;
    std::stringstream ds(header.substr(5, semi - 5));
    for (std::string tok; std::getline(ds, tok, ',');) dims.push_back(std::stoi(tok));
    HexDump r{BoxGeometry(dims), header.substr(semi + 4), Configuration()};
    r.config = Configuration(r.geometry);
    if (body.size() != 16 * r.config.words().size()) throw std::invalid_argument("hex dump body length mismatch");
    for (std::size_t i = 0; i < r.config.words().size(); ++i)
        r.config.words()[i] = std::stoull(body.substr(16 * i, 16), nullptr, 16);
    if (r.geometry.sites() % 64 && (r.config.words().back() >> (r.geometry.sites() % 64)))
        throw std::invalid_argument("hex dump sets bits outside the box");
    return r;
}

}  // namespace metastab
