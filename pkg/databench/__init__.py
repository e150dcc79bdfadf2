"""Databench package: planted-activity corpus generation, curation, queries and splits"""
