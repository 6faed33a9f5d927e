"""rodstab: stability of prestrained Kirchhoff rods under an end force."""
