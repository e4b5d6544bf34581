#pragma once

#include <string>

#include "graphnlp/graph.hpp"

namespace gnlp {

/// Text serialization of an OptiGraph as JSON.
///
/// Schema (all arrays in construction order):
///   {
///     "format": "graphnlp-model", "version": 1,
///     "nodes": <count>,
///     "edges": [[i, j], ...],                      1-based node ids
///     "variables": [{"node": i, "name"?: s,
///                    "lb"?: d, "ub"?: d, "start"?: d}, ...],
///     "constraints": [{"node": i, "expr": E, "sense": "eq"|"le"|"ge",
///                      "rhs": d, "link": b, "name"?: s}, ...],
///     "objective": [{"node": i, "expr": E}, ...]
///   }
/// Expressions E are prefix-notation arrays over the operator catalog:
///   3.5                  constant
///   ["var", k]           k = 0-based index into "variables"
///   ["neg", E] and the other unary operators likewise
///   ["pow_int", E, n]    integer exponent
///   ["add", E, E] and the other binary operators likewise
/// Omitted fields mean: lb = -inf, ub = +inf, start = default, name = "".
/// write_model(read_model(text)) reproduces text byte for byte.
std::string write_model(const OptiGraph& g);
OptiGraph read_model(const std::string& text);

/// File helpers; read/load throw ParseError on malformed input or I/O
/// failure.
void save_model(const OptiGraph& g, const std::string& path);
OptiGraph load_model(const std::string& path);

}  // namespace gnlp
