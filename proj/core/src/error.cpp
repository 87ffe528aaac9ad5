#include "confmc/error.hpp"

namespace confmc {

ParseError::ParseError(const std::string& message, std::size_t line, std::size_t column)
    : std::runtime_error(line == 0 ? message
                                   : message + " (line " + std::to_string(line) +
                                         (column == 0 ? "" : ", column " + std::to_string(column)) +
                                         ")"),
      line_(line),
      column_(column) {}

}  // namespace confmc
