// Copyright 2026 The sbvae Authors
// SPDX-License-Identifier: Apache-2.0
#include "sbvae/common.hpp"

#include <iostream>
#include <mutex>

namespace sbvae {
namespace {

std::mutex& handler_mutex() {
  static std::mutex m;
  return m;
}

std::function<void(const std::string&)>& handler() {
  static std::function<void(const std::string&)> h;
  return h;
}

}  // namespace

void warn(const std::string& message) {
  std::lock_guard lock(handler_mutex());
  if (handler()) {
    handler()(message);
  } else {
    std::cerr << "sbvae: warning: " << message << '\n';
  }
}

void set_warning_handler(std::function<void(const std::string&)> h) {
  std::lock_guard lock(handler_mutex());
  handler() = std::move(h);
}

}  // namespace sbvae
