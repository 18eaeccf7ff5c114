#pragma once

// Defines the C allocation functions for the whole program and feeds
// nidsrl::heap. Include from exactly one translation unit. glibc only;
// elsewhere this header is empty and measurements fall back to estimates.

#include <cstddef>

#include "nidsrl/alloc_tracker.hpp"

#if defined(__GLIBC__)
#include <malloc.h>

#include <cerrno>

extern "C" {
void* __libc_malloc(std::size_t);
void* __libc_calloc(std::size_t, std::size_t);
void* __libc_realloc(void*, std::size_t);
void* __libc_memalign(std::size_t, std::size_t);
void __libc_free(void*);
}

namespace {
void* nidsrl_note(void* p) {
  if (p) nidsrl::heap::on_alloc(static_cast<std::int64_t>(malloc_usable_size(p)));
  return p;
}
}  // namespace

extern "C" {

void* malloc(std::size_t n) noexcept { return nidsrl_note(__libc_malloc(n)); }

void* calloc(std::size_t n, std::size_t m) noexcept { return nidsrl_note(__libc_calloc(n, m)); }

void free(void* p) noexcept {
  if (!p) return;
  nidsrl::heap::on_free(static_cast<std::int64_t>(malloc_usable_size(p)));
  __libc_free(p);
}

void* realloc(void* p, std::size_t n) noexcept {
  const std::size_t old = p ? malloc_usable_size(p) : 0;
  void* q = __libc_realloc(p, n);
  if (q || n == 0) {
    nidsrl::heap::on_free(static_cast<std::int64_t>(old));
    if (q) nidsrl::heap::on_alloc(static_cast<std::int64_t>(malloc_usable_size(q)));
  }
  return q;
}

void* memalign(std::size_t align, std::size_t n) noexcept { return nidsrl_note(__libc_memalign(align, n)); }

void* aligned_alloc(std::size_t align, std::size_t n) noexcept { return nidsrl_note(__libc_memalign(align, n)); }

int posix_memalign(void** out, std::size_t align, std::size_t n) noexcept {
  if (align < sizeof(void*) || (align & (align - 1)) != 0) return EINVAL;
  void* p = __libc_memalign(align, n);
  if (!p) return ENOMEM;
  *out = nidsrl_note(p);
  return 0;
}
}
#endif
