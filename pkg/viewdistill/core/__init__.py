# Core helpers package
