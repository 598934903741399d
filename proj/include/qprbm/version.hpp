#pragma once

#define QPRBM_VERSION "1.0.0"
