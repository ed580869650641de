#include <pybind11/pybind11.h>
PYBIND11_MODULE(_canforge, m) { m.doc() = "canforge"; }
