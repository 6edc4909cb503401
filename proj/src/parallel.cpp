#include "qlt/parallel.hpp"

// All of par is header-inline; this TU anchors the object in the library.
