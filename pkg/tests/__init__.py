"""Tests package for gwrm-kit"""
