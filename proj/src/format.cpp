#include "fanlasso/format.hpp"

#include <charconv>

#include "fanlasso/common.hpp"

namespace fanlasso {

std::string format_double(double value) {
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof(buf), value);
  if (res.ec != std::errc{}) throw ValidationError("format_double: conversion failed");
  return std::string(buf, res.ptr);
}

}  // namespace fanlasso
